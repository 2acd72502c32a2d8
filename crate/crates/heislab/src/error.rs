use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeisError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("cube not found: {0}")]
    UnknownCube(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
}

pub type Result<T> = std::result::Result<T, HeisError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(HeisError::Domain(msg.into()))
}
