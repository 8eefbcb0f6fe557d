use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A size limit was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numerical procedure broke down or failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Operand shapes do not agree.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Malformed input file or record.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
