use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("kernel row for (state {state}, action {action}) is not a probability distribution")]
    NonStochasticRow { state: usize, action: usize },

    #[error("reward for (state {state}, action {action}) lies outside [0, r_max]")]
    RewardOutOfRange { state: usize, action: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("span of an empty vector is undefined")]
    EmptyVector,

    #[error("no convergence after {max_iter} iterations")]
    NoConvergence { max_iter: usize },

    #[error("truncated value at state {state} is not attainable by any action mixture")]
    InfeasibleTruncation { state: usize },

    #[error("truncated operator is not globally feasible at the current value")]
    FeasibilityViolation,

    #[error("value span {span} exceeds span cap {cap}")]
    SpanPrecondition { span: f64, cap: f64 },

    #[error("continuous bonus requires Hölder parameters (L, alpha)")]
    MissingHolderParams,

    #[error("state {0} lies outside [0, 1]")]
    OutOfDomain(f64),

    #[error("support size {gamma} must lie in 1..={states}")]
    BadGamma { gamma: usize, states: usize },

    #[error("invalid parameters: {0}")]
    BadParams(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
