//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by estimation, identification, and the data pipeline.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition (dimension mismatch,
    /// non-finite input, out-of-range horizon, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An internal state invariant is violated (e.g. mixture weights off the
    /// simplex).
    #[error("invalid state: {0}")]
    InvalidState(String),

    /// A configuration file or configuration value is unusable.
    #[error("config error: {0}")]
    Config(String),

    /// The input data cannot be loaded or transformed.
    #[error("data error: {0}")]
    Data(String),

    /// A numerical operation failed beyond recovery (Cholesky breakdown,
    /// all-candidate likelihood underflow, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid_input(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn invalid_state(msg: impl Into<String>) -> Self {
        Error::InvalidState(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// Process exit code for the CLI: 2 config, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidInput(_) | Error::InvalidState(_) => 2,
            Error::Data(_) | Error::Io(_) => 3,
            Error::Numeric(_) => 4,
        }
    }
}
