use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure talking to an external model service (embedder, labeler, generator).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("malformed response: {0}")]
    Malformed(String),
    #[error("service unavailable: {0}")]
    Unavailable(String),
}

/// One QA record that failed validation against the corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaIssue {
    pub qa_id: String,
    pub reason: String,
}

impl fmt::Display for QaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.qa_id, self.reason)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("validation failed for {} record(s): {}", .0.len(), join_issues(.0))]
    Validation(Vec<QaIssue>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown article `{0}`")]
    UnknownArticle(String),

    #[error("dimension mismatch for `{id}`: expected {expected}, got {actual}")]
    Dimension { id: String, expected: usize, actual: usize },

    #[error("missing embeddings for articles: {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),

    #[error("zero vector has no defined cosine similarity")]
    ZeroVector,

    #[error("no answer found")]
    NoAnswer,

    #[error(transparent)]
    Transport(#[from] TransportError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_issues(issues: &[QaIssue]) -> String {
    issues
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
