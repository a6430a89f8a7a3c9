use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input row; `line` is 1-based within the source file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// Structurally invalid or inconsistent data (ids out of range,
    /// mismatched tables, records outside the observation window, ...).
    #[error("data error: {0}")]
    Data(String),

    /// A parameter violates its domain (negative rate, zero variance, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    /// Numerical breakdown (degenerate importance weights, non-finite
    /// posterior weights, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
