use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error("invalid argument `{name}`: {message}")]
    InvalidArgument { name: &'static str, message: String },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("insufficient history: need more than {needed} values, got {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("objective returned non-finite value {value} for particle {particle} at iteration {iteration}")]
    NonFiniteObjective {
        particle: usize,
        iteration: usize,
        value: f64,
    },
    #[error("serialization: {0}")]
    Serialization(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }

    /// True for errors caused by degenerate statistics (constant data, zero variance).
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
