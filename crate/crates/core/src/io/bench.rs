//! Benchmark harness: test-function suite, simulated evaluation latency,
//! solved counts, wall-clock speedups and algorithm comparisons.

use std::collections::BTreeMap;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::domain::ObjectiveSense;
use crate::engine::{best_so_far_trace, optimize, Budget, EngineConfig, Objective, OptimizationResult};
use crate::error::{ConfigError, EvalError, Result};
use crate::io::random_search::random_search;
use crate::io::stats::{count_better_matrix, friedman, marker, rank_rows, FriedmanResult};
use crate::io::testfns::{self, gap, solved_01pct, solved_1pct, threshold_1pct, TestFunction, SUITE};
use crate::rng::RngStream;
use crate::scheduler::run_parallel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Rbf,
    RandomSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetRule {
    /// `m · (n + 1)` evaluations.
    PerDimension(usize),
    Fixed(usize),
}

impl BudgetRule {
    pub fn evaluations(self, n: usize) -> usize {
        match self {
            BudgetRule::PerDimension(m) => m * (n + 1),
            BudgetRule::Fixed(k) => k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchSpec {
    pub functions: Vec<&'static TestFunction>,
    pub seeds: usize,
    pub worker_counts: Vec<usize>,
    /// Uniform per-evaluation delay in milliseconds.
    pub latency_ms: Option<(f64, f64)>,
    pub algorithms: Vec<Algorithm>,
    pub budget: BudgetRule,
    /// End each run as soon as it is within 1% of the optimum.
    pub stop_when_solved: bool,
}

/// Named suites: `standard` (all functions), `quick`, or a comma list of function names.
pub fn suite(name: &str) -> std::result::Result<Vec<&'static TestFunction>, ConfigError> {
    match name {
        "standard" | "all" => Ok(SUITE.iter().collect()),
        "quick" => ["branin", "goldstein_price", "hartman3", "sphere2", "shekel5"]
            .iter()
            .map(|n| testfns::lookup(n))
            .collect(),
        list => list.split(',').map(|n| testfns::lookup(n.trim())).collect(),
    }
}

impl BenchSpec {
    pub fn new(functions: Vec<&'static TestFunction>) -> Self {
        Self {
            functions,
            seeds: 1,
            worker_counts: vec![1],
            latency_ms: None,
            algorithms: vec![Algorithm::Rbf],
            budget: BudgetRule::PerDimension(60),
            stop_when_solved: false,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        if self.functions.is_empty() {
            return Err(ConfigError::Invalid("benchmark suite is empty".into()));
        }
        if self.seeds == 0 {
            return Err(ConfigError::Invalid("need at least one seed".into()));
        }
        if self.worker_counts.is_empty() || self.worker_counts.contains(&0) {
            return Err(ConfigError::NoWorkers);
        }
        if self.algorithms.is_empty() {
            return Err(ConfigError::Invalid("no algorithms selected".into()));
        }
        if let Some((a, b)) = self.latency_ms {
            if !(a >= 0.0 && a <= b && b.is_finite()) {
                return Err(ConfigError::Invalid(format!("latency range {a}:{b} is invalid")));
            }
        }
        Ok(())
    }
}

/// Wraps a test function with a deterministic pseudo-random sleep per point.
pub struct Delayed<'a> {
    pub function: &'a TestFunction,
    pub latency_ms: Option<(f64, f64)>,
    pub seed: u64,
}

impl Objective for Delayed<'_> {
    fn evaluate(&self, x: &[f64]) -> std::result::Result<f64, EvalError> {
        if let Some((a, b)) = self.latency_ms {
            let mut h = std::collections::hash_map::DefaultHasher::new();
            x.iter().for_each(|v| v.to_bits().hash(&mut h));
            let mut rng = RngStream::new(self.seed, "latency").child(h.finish()).rng();
            let ms = if b > a { rng.random_range(a..b) } else { a };
            std::thread::sleep(Duration::from_secs_f64(ms / 1e3));
        }
        Ok(self.function.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub function: String,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub workers: usize,
    pub best_value: f64,
    pub gap: f64,
    pub solved_1pct: bool,
    pub solved_01pct: bool,
    /// Wall-clock time at which the first 1%-solution was recorded.
    pub time_to_solve_ms: Option<f64>,
    pub wall_ms: f64,
    pub evaluations: usize,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkerRow {
    pub workers: usize,
    pub runs: usize,
    pub solved_1pct: usize,
    pub solved_01pct: usize,
    /// Mean time to a 1%-solution, over runs solved at every worker count.
    pub mean_time_s: Option<f64>,
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionComparison {
    pub function: String,
    pub algorithms: Vec<Algorithm>,
    pub count_better: Vec<Vec<usize>>,
    pub markers: Vec<String>,
    pub friedman_statistic: Option<f64>,
    pub friedman_significant_95: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub runs: Vec<RunSummary>,
    /// Surrogate runs grouped by worker count.
    pub worker_rows: Vec<WorkerRow>,
    /// (function, seed) pairs solved at 1% by every worker count.
    pub common_solved: Vec<(String, u64)>,
    pub comparisons: Vec<FunctionComparison>,
}

fn summarize(
    f: &TestFunction,
    seed: u64,
    algorithm: Algorithm,
    workers: usize,
    result: &OptimizationResult,
    wall: Duration,
) -> RunSummary {
    let time_to_solve_ms = result
        .evaluations
        .iter()
        .filter(|r| !r.failed && solved_1pct(result.sense.to_user(r.value), f.optimum))
        .map(|r| r.t_wall_ms)
        .reduce(f64::min);
    RunSummary {
        function: f.name.into(),
        seed,
        algorithm,
        workers,
        best_value: result.best_value,
        gap: gap(result.best_value, f.optimum),
        solved_1pct: solved_1pct(result.best_value, f.optimum),
        solved_01pct: solved_01pct(result.best_value, f.optimum),
        time_to_solve_ms,
        wall_ms: wall.as_secs_f64() * 1e3,
        evaluations: result.evaluations.len(),
        trace: best_so_far_trace(result),
    }
}

/// Runs one (function, seed, algorithm, workers) combination.
pub fn run_one(
    spec: &BenchSpec,
    f: &'static TestFunction,
    seed: u64,
    algorithm: Algorithm,
    workers: usize,
) -> Result<RunSummary> {
    let objective = Delayed { function: f, latency_ms: spec.latency_ms, seed };
    let domain = f.domain();
    let budget = Budget {
        max_evaluations: Some(spec.budget.evaluations(f.dim)),
        target_value: spec.stop_when_solved.then(|| threshold_1pct(f.optimum)),
        ..Default::default()
    };
    let config = EngineConfig::default();
    let sense = ObjectiveSense::Minimize;
    let start = Instant::now();
    let result = match (algorithm, workers) {
        (Algorithm::Rbf, 1) => optimize(&objective, &domain, sense, &budget, &config, seed)?,
        (Algorithm::Rbf, w) => run_parallel(&objective, &domain, sense, &budget, &config, w, seed)?.result,
        (Algorithm::RandomSearch, _) => {
            random_search(&objective, &domain, sense, &budget, &RngStream::new(seed, "random_search"))?
        }
    };
    Ok(summarize(f, seed, algorithm, workers, &result, start.elapsed()))
}

fn worker_rows(runs: &[RunSummary], worker_counts: &[usize]) -> (Vec<WorkerRow>, Vec<(String, u64)>) {
    let rbf: Vec<&RunSummary> = runs.iter().filter(|r| r.algorithm == Algorithm::Rbf).collect();
    let mut by_pair: BTreeMap<(String, u64), BTreeMap<usize, Option<f64>>> = BTreeMap::new();
    for r in &rbf {
        by_pair.entry((r.function.clone(), r.seed)).or_default().insert(r.workers, r.time_to_solve_ms);
    }
    let common: Vec<(String, u64)> = by_pair
        .iter()
        .filter(|(_, times)| worker_counts.iter().all(|w| times.get(w).copied().flatten().is_some()))
        .map(|(k, _)| k.clone())
        .collect();
    let mean_time = |w: usize| -> Option<f64> {
        if common.is_empty() {
            return None;
        }
        let total: f64 = common.iter().map(|k| by_pair[k][&w].expect("common pairs are solved")).sum();
        Some(total / common.len() as f64 / 1e3)
    };
    let base = worker_counts.iter().min().copied().unwrap_or(1);
    let base_time = mean_time(base);
    let rows = worker_counts
        .iter()
        .map(|&w| {
            let mine: Vec<&&RunSummary> = rbf.iter().filter(|r| r.workers == w).collect();
            let mean_time_s = mean_time(w);
            WorkerRow {
                workers: w,
                runs: mine.len(),
                solved_1pct: mine.iter().filter(|r| r.solved_1pct).count(),
                solved_01pct: mine.iter().filter(|r| r.solved_01pct).count(),
                mean_time_s,
                speedup: match (base_time, mean_time_s) {
                    _ if w == base => Some(1.0),
                    (Some(b), Some(t)) if t > 0.0 => Some(b / t),
                    _ => None,
                },
            }
        })
        .collect();
    (rows, common)
}

/// Paired comparison of algorithms at the smallest worker count.
fn comparisons(spec: &BenchSpec, runs: &[RunSummary]) -> Result<Vec<FunctionComparison>> {
    let workers = spec.worker_counts.iter().min().copied().unwrap_or(1);
    let mut algorithms = spec.algorithms.clone();
    algorithms.sort();
    algorithms.dedup();
    if algorithms.len() < 2 {
        return Ok(vec![]);
    }
    let mut out = Vec::new();
    for f in &spec.functions {
        let table: Vec<Vec<f64>> = (0..spec.seeds as u64)
            .map(|seed| {
                algorithms
                    .iter()
                    .map(|&a| {
                        runs.iter()
                            .find(|r| r.function == f.name && r.seed == seed && r.algorithm == a && (r.workers == workers || a == Algorithm::RandomSearch))
                            .map_or(f64::INFINITY, |r| r.best_value)
                    })
                    .collect()
            })
            .collect();
        let m = count_better_matrix(&table, ObjectiveSense::Minimize);
        let markers = (0..algorithms.len())
            .map(|i| (0..algorithms.len()).map(|j| if i == j { '-' } else { marker(&m, i, j) }).collect())
            .collect();
        let fr: Option<FriedmanResult> =
            if table.len() >= 2 { Some(friedman(&rank_rows(&table, ObjectiveSense::Minimize))?) } else { None };
        out.push(FunctionComparison {
            function: f.name.into(),
            algorithms: algorithms.clone(),
            count_better: m,
            markers,
            friedman_statistic: fr.map(|r| r.statistic),
            friedman_significant_95: fr.map(|r| r.significant_95),
        });
    }
    Ok(out)
}

/// Runs every (function, seed, algorithm, worker count) combination and
/// writes the report as JSON to `out_path` when given. Random search runs
/// once per seed regardless of worker counts.
pub fn run_bench(spec: &BenchSpec, out_path: Option<&Path>) -> Result<ComparisonReport> {
    spec.validate()?;
    let mut runs = Vec::new();
    for f in &spec.functions {
        for seed in 0..spec.seeds as u64 {
            for &a in &spec.algorithms {
                let counts: &[usize] = if a == Algorithm::RandomSearch { &[1] } else { &spec.worker_counts };
                for &w in counts {
                    runs.push(run_one(spec, f, seed, a, w)?);
                }
            }
        }
    }
    let (worker_rows, common_solved) = worker_rows(&runs, &spec.worker_counts);
    let report = ComparisonReport { comparisons: comparisons(spec, &runs)?, runs, worker_rows, common_solved };
    if let Some(path) = out_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

impl ComparisonReport {
    /// Plain-text summary tables.
    pub fn render(&self) -> String {
        let mut s = String::from("workers  runs  solved(1%)  solved(0.1%)  time(s)  speedup\n");
        for r in &self.worker_rows {
            let fmt = |v: Option<f64>, prec: usize| v.map_or("-".to_string(), |v| format!("{v:.prec$}"));
            s.push_str(&format!(
                "{:>7}  {:>4}  {:>10}  {:>12}  {:>7}  {:>7}\n",
                r.workers,
                r.runs,
                r.solved_1pct,
                r.solved_01pct,
                fmt(r.mean_time_s, 2),
                fmt(r.speedup, 2)
            ));
        }
        s.push_str(&format!("instances solved by all worker counts: {}\n", self.common_solved.len()));
        for c in &self.comparisons {
            s.push_str(&format!("\n{}:", c.function));
            for (i, a) in c.algorithms.iter().enumerate() {
                let cells: Vec<String> = c.count_better[i]
                    .iter()
                    .zip(c.markers[i].chars())
                    .map(|(n, m)| format!("{n} ({m})"))
                    .collect();
                s.push_str(&format!("\n  {:<14} {}", format!("{a:?}"), cells.join("  ")));
            }
            if let (Some(st), Some(sig)) = (c.friedman_statistic, c.friedman_significant_95) {
                s.push_str(&format!("\n  friedman {st:.3} significant={sig}"));
            }
            s.push('\n');
        }
        s
    }
}
