use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConicError {
    #[error("malformed problem: {0}")]
    Dimension(String),
    #[error("non-finite data in {0}")]
    NonFinite(String),
}
