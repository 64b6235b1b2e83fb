//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A line in a JSONL or vector file failed to parse or validate.
    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    /// A corruption plan was applied to text it was not built from.
    #[error("corruption plan does not match text: {0}")]
    PlanMismatch(String),

    /// Truth and detected annotations tokenized the instance differently.
    #[error("tokenization drift on {instance_id}: truth has {truth} tokens, detected has {detected}")]
    TokenizationDrift {
        instance_id: String,
        truth: usize,
        detected: usize,
    },

    #[error("llm request failed for {instance_id}: {message}")]
    Llm {
        instance_id: String,
        message: String,
    },

    #[error("instance {0} missing from vector file")]
    MissingInstance(String),

    #[error("training produced a non-finite loss; check feature scaling")]
    NonFiniteLoss,

    #[error("only one class present; ROC-AUC is undefined")]
    SingleClass,

    #[error("no group split kept both labels on both sides after {0} attempts")]
    SplitFailed(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn line(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::MalformedLine {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
