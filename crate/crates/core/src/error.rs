use std::io;

use thiserror::Error;

/// Every fallible operation in the crate returns this error.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("insufficient samples: {context} has {n} samples, need more than {k}")]
    InsufficientSamples { context: String, n: usize, k: usize },

    #[error("degenerate variable `{0}`: it takes a single value, entropy is zero")]
    DegenerateVariable(String),

    #[error("degenerate label: {0}")]
    DegenerateLabel(String),

    #[error("missing field: {0}")]
    MissingField(String),

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("alignment error: {count} sample ids not found in dataset (first: {preview:?})")]
    Alignment { count: usize, preview: Vec<u64> },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
