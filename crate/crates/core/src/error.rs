use thiserror::Error;

/// Errors produced by tensor, mesh, and transform operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("decomposition error: {0}")]
    Decomposition(String),

    #[error("communication error: {0}")]
    Communication(String),

    /// SPMD discipline was violated (mismatched or missing collectives).
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("plan error: {0}")]
    Plan(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}
