//! Configuration, evaluator protocol, logs, benchmarks and statistics.

pub mod bench;
pub mod config;
pub mod log;
pub mod protocol;
pub mod random_search;
pub mod stats;
pub mod testfns;
