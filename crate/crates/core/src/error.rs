use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{what} needs at least {needed} rows, got {got}")]
    TooFewRows {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("covariance of component {0} is not symmetric positive definite")]
    NotPositiveDefinite(usize),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("coordinate {0} has zero variance")]
    DegenerateCoordinate(usize),

    #[error("forward cache does not match the parameters passed to backward")]
    StaleCache,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("plugin: {0}")]
    Plugin(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name: name.into(),
        reason: reason.into(),
    }
}
