use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the spectral equality testing library.
#[derive(Debug, Error)]
pub enum SpectestError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("degenerate scale estimate: {0}")]
    DegenerateScale(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("experiment failed: {0}")]
    Experiment(String),
}

pub type Result<T> = std::result::Result<T, SpectestError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SpectestError::InvalidInput(msg.into()))
}
