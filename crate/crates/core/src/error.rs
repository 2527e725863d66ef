use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "user sampling exhausted after {attempts} attempts in cell {cell}; \
         the minimum user distance likely leaves no admissible area"
    )]
    SamplingExhausted { cell: usize, attempts: usize },

    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),

    #[error("angular spread half-width must be positive, got {0}")]
    NonPositiveSpread(f64),

    #[error("pilot observation covariance is numerically singular for (cell {cell}, user {user}, sub-array {subarray})")]
    SingularQ {
        cell: usize,
        user: usize,
        subarray: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("SINR target must be positive, got {0}")]
    NonPositiveTarget(f64),

    #[error("conic solver failure: {0}")]
    NumericalFailure(String),

    #[error("bisection upper bound still feasible after {0} doublings")]
    BoundsExhausted(usize),

    #[error("degenerate estimator statistics: every power-constraint weight is zero")]
    DegenerateStats,

    #[error("grid search supports at most {max} power variables, got {got}")]
    GridTooLarge { max: usize, got: usize },

    #[error("no successful drops to summarize")]
    EmptyResults,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
