use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("xml parse error at byte {offset}: {message}")]
    Xml { offset: u64, message: String },

    #[error("empty document")]
    EmptyDocument,

    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("registry: {0}")]
    Registry(String),

    #[error("ambiguous pattern {pattern:?} is claimed by both {first} and {second}")]
    AmbiguousPattern {
        pattern: String,
        first: String,
        second: String,
    },

    #[error("mention at byte {offset} in {doc_id} is not covered by any sentence")]
    Consistency { doc_id: String, offset: usize },

    #[error("protocol error for context {context_id}: {message}")]
    Protocol { context_id: String, message: String },

    #[error("service unavailable: {0}")]
    Unavailable(String),

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("missing predictions for {} gold context(s): {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),

    #[error("orphan predictions without a context: {}", .0.join(", "))]
    OrphanPredictions(Vec<String>),

    #[error("{0}")]
    Split(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
