use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum HsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point lies outside the sampled domain")]
    OutOfDomain,

    #[error("point is not on the graph (gap {gap:e})")]
    NotOnGraph { gap: f64 },

    #[error("linearly dependent input: {0}")]
    Dependent(String),

    #[error("too few samples: got {got}, need at least {needed}")]
    TooFewSamples { got: usize, needed: usize },

    #[error("reparametrization clipped by the domain at {nodes} nodes")]
    DomainClipped { nodes: usize },

    #[error("failed to converge: {0}")]
    NoConvergence(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("comparison violated: {0}")]
    Violation(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HsError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HsError::InvalidArgument(msg.into()))
}
