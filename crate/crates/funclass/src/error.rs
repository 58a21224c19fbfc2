//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
///
/// The variants map onto the CLI exit codes: configuration problems, data
/// problems (unreadable or malformed inputs, invalid values), and internal
/// invariant violations that indicate a bug rather than bad input.
#[derive(Debug, Error)]
pub enum Error {
    /// An operation received input violating its preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A configuration file or option is malformed or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// A data file could not be read or parsed.
    #[error("data error: {0}")]
    Data(String),

    /// An internal invariant was violated.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
