//! Surrogate-based derivative-free optimization of expensive box-constrained
//! mixed-integer black-box functions.
//!
//! The optimizer fits a thin plate spline interpolant with a linear tail to
//! every evaluated point, then picks the next point by trading off surrogate
//! value against distance from what has already been tried, with the trade-off
//! weight cycling between the two. [`scheduler::run_parallel`] runs the same
//! loop asynchronously over several workers; [`hpo`] maps neural network
//! hyperparameter spaces onto the box domain.

pub mod design;
pub mod domain;
pub mod engine;
pub mod error;
pub mod hpo;
pub mod io;
pub mod proposer;
pub mod rng;
pub mod scheduler;
pub mod surrogate;

pub use domain::{BoxDomain, EvalRecord, NodeSet, ObjectiveSense, RecordKind};
pub use engine::{
    best_so_far_trace, optimize, Budget, EngineConfig, Fallible, Objective, OptimizationResult, StopReason, ValueTransform,
};
pub use error::{Error, EvalError, Result};
pub use rng::RngStream;
pub use scheduler::{audit, run_parallel, AuditReport, ParallelRun};
pub use surrogate::{Kernel, RbfModel};
