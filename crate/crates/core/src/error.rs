use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid polytope: {0}")]
    InvalidPolytope(String),

    #[error(
        "grid with resolution {delta} has only {count} point(s) in the domain; need at least 2"
    )]
    GridTooCoarse { delta: f64, count: usize },

    #[error("rejection sampler exhausted its budget of {budget} proposals after accepting {accepted} point(s)")]
    SamplerBudgetExhausted { budget: usize, accepted: usize },

    #[error(
        "greedy code construction produced {found} of {target} codewords within {budget} attempts"
    )]
    CodeBudgetExhausted {
        found: usize,
        target: usize,
        budget: usize,
    },

    #[error("index {index} out of range for {len} element(s)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
