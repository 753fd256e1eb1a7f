use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    Dimension {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("non-finite value while evaluating {0}")]
    NonFinite(String),

    #[error("training aborted at step {step}: {detail}")]
    TrainingAborted { step: usize, detail: String },

    #[error("format error in {path}: {detail}")]
    Format { path: PathBuf, detail: String },

    #[error("corrupt dataset: {0}")]
    CorruptDataset(String),

    #[error("model archive error for tensor `{tensor}`: {detail}")]
    Archive { tensor: String, detail: String },

    #[error("score tables do not cover the same keys; missing: {0}")]
    KeyMismatch(String),

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("unknown sample id {0}")]
    UnknownSample(u32),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn dim(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
