use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("line {line}: unknown language tag {tag:?} (expected one of en, de, es, zh)")]
    UnknownLanguage { line: usize, tag: String },

    #[error("line {line}: duplicate id {id:?} (first seen on line {first_line})")]
    DuplicateId {
        line: usize,
        first_line: usize,
        id: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("empty input{}", context.as_ref().map(|c| format!(" ({c})")).unwrap_or_default())]
    EmptyInput { context: Option<String> },

    #[error("degenerate {what}: norm {norm:e} is below 1e-12")]
    Degenerate { what: &'static str, norm: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite {what} at batch {batch}: {value}")]
    NonFinite {
        batch: usize,
        what: String,
        value: f64,
    },

    #[error("run references query ids missing from qrels: {}", .0.join(", "))]
    UnknownQueries(Vec<String>),

    #[error("translation provider failed: {0}")]
    Provider(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub(crate) fn empty(context: impl Into<String>) -> Self {
        Self::EmptyInput {
            context: Some(context.into()),
        }
    }

    pub fn file(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::File {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for the CLI: 2 input/format, 3 numeric, 4 id mismatch.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonFinite { .. } | Error::Degenerate { .. } => 3,
            Error::UnknownQueries(_) => 4,
            _ => 2,
        }
    }
}
