use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification of failures, used by the command line to pick an
/// exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Schema,
    Data,
    Config,
    Integrity,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: column `{column}` not found in header")]
    MissingColumn { column: String },

    #[error("line {line}: {message}")]
    Row { line: u64, message: String },

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("value out of domain: {0}")]
    Domain(String),

    #[error("config error for key `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("{path}: line {line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("word `{0}` not found in embedding table")]
    Lookup(String),

    #[error("undefined cosine: zero-norm vector")]
    ZeroVector,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate direction: mean difference vector is zero")]
    DegenerateDirection,

    #[error("training error: {0}")]
    Training(String),

    #[error("population generation error: {0}")]
    Generation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MissingColumn { .. } => ErrorKind::Schema,
            Error::Row { .. }
            | Error::EmptyDataset(_)
            | Error::Domain(_)
            | Error::Format { .. }
            | Error::Lookup(_)
            | Error::ZeroVector
            | Error::DimensionMismatch { .. }
            | Error::DegenerateDirection
            | Error::Training(_)
            | Error::Generation(_) => ErrorKind::Data,
            Error::Config { .. } => ErrorKind::Config,
            Error::Integrity(_) => ErrorKind::Integrity,
            Error::Io { .. } | Error::Json(_) => ErrorKind::Io,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
