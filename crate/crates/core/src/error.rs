use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by every layer of the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("axis {axis} out of range for dimension {dimension}")]
    AxisOutOfRange { axis: usize, dimension: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("quadrature order {0} outside 1..=512")]
    QuadratureOrder(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("every path is flagged at step {step}")]
    AllPathsFlagged { step: usize },

    #[error("total weight is zero")]
    ZeroTotalWeight,

    #[error("degenerate sample: {0}")]
    DegenerateSample(&'static str),

    #[error("configuration mismatch: {0}")]
    ConfigurationMismatch(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.into(),
            message: message.into(),
        }
    }
}
