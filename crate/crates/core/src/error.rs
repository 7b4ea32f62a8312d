use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("domain must have at least one dimension")]
    Empty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {dim}: invalid bounds [{lower}, {upper}] (need finite lower < upper)")]
    InvalidBounds { dim: usize, lower: f64, upper: f64 },
    #[error("integer index {index} out of range for n = {n}")]
    IntegerIndexOutOfRange { index: usize, n: usize },
    #[error("integer dimension {dim} has non-integer bounds [{lower}, {upper}]")]
    FractionalIntegerBounds { dim: usize, lower: f64, upper: f64 },
    #[error("dimension {dim}: value {value} outside [{lower}, {upper}]")]
    OutOfBounds { dim: usize, value: f64, lower: f64, upper: f64 },
    #[error("node set is empty")]
    EmptyNodeSet,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("design size {k} is below n + 1 = {min}")]
    TooFewPoints { k: usize, min: usize },
    #[error("could not obtain a poised design after {attempts} attempts and perturbation: {diagnostic}")]
    NotPoised { attempts: usize, diagnostic: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least n + 1 = {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },
    #[error("nodes {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("nodes are not poised for a degree-1 tail")]
    RankDeficient,
    #[error("linear system stays ill-conditioned with regularization {0:e}")]
    IllConditioned(f64),
    #[error("non-finite node value at index {0}")]
    NonFiniteValue(usize),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProposerError {
    #[error("no acceptable point found in {draws} random draws; domain is saturated")]
    Saturated { draws: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Why a single objective evaluation did not produce a value.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("objective returned a non-finite value")]
    NonFinite,
    #[error("evaluation timed out after {0:?}")]
    Timeout(std::time::Duration),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("evaluator process failed: {0}")]
    Process(String),
    #[error("objective reported an error: {0}")]
    Reported(String),
    #[error("worker crashed: {0}")]
    Crashed(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{0}")]
    Invalid(String),
    #[error("budget: at least one stopping criterion is required")]
    NoStoppingCriterion,
    #[error("max evaluations {max} is below the initial design size {design}")]
    BudgetBelowDesign { max: usize, design: usize },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
    #[error("workers must be at least 1")]
    NoWorkers,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Design(#[from] DesignError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Proposer(#[from] ProposerError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{count} consecutive failed evaluations; last: {last}")]
    TooManyFailures { count: usize, last: EvalError },
    #[error("no successful evaluation to build a model from")]
    NoSuccessfulEvaluations,
    #[error("scheduler contract violated: {0}")]
    Contract(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
