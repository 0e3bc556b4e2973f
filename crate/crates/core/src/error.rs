use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: u64, column: usize, message: String },

    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("neighbor cache error: {0}")]
    Cache(String),

    #[error("neighbor cache was built from different data (checksum mismatch)")]
    ChecksumMismatch,

    #[error(
        "layout diverged at iteration {iteration} (non-finite coordinate at point {point}); \
         try a smaller force scale b (currently {b})"
    )]
    Divergence { iteration: u64, point: usize, b: f64 },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
