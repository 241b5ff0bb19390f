use thiserror::Error;

/// Errors raised by problem oracles, steppers, and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("lower bound {lower_bound} exceeds minibatch value {value}")]
    InvalidLowerBound { value: f64, lower_bound: f64 },

    #[error("coordinate {0} has zero averaged curvature; optimum is not unique")]
    ZeroCurvature(usize),

    #[error("proxy lower bound is unbounded below (mu_F = 0 with nonzero correction)")]
    UnboundedProxy,

    #[error("line search did not terminate after {0} probes")]
    LineSearchStalled(usize),

    #[error("non-finite value in {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: u64 },

    #[error("suboptimality {0:e} below reference slack; reference optimum is stale")]
    StaleReference(f64),

    #[error("missing exact minibatch optimum required by {0}")]
    MissingOptimum(&'static str),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    InvariantViolated(String),

    #[error("trace alignment error: {0}")]
    Alignment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
