use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid search domain: {0}")]
    InvalidDomain(String),

    #[error("covariance matrix is not positive definite even with jitter {jitter:e}")]
    IllConditioned { jitter: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("initial point crashed; no feasible anchor for resets")]
    InitialPointCrashed,

    #[error("unsupported benchmark case `{0}`")]
    UnsupportedCase(String),

    #[error("objective requested for a crashed episode")]
    CrashedEpisode,

    #[error("Riccati iteration did not converge after {iterations} iterations")]
    RiccatiDiverged { iterations: usize },

    #[error("controller spec does not match case `{case}`: expected {expected} parameters, got {got}")]
    SpecMismatch {
        case: String,
        expected: usize,
        got: usize,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Json(#[from] serde_json::Error),
}
