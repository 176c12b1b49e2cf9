use cipre_conic::ConicError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("{0}")]
    Modulation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

#[derive(Debug, Error)]
pub enum PrecodeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("conic solver rejected the problem: {0}")]
    Conic(#[from] ConicError),
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Precode(#[from] PrecodeError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
