//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A line-oriented input file failed to parse.
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    /// Input data violates a documented contract (duplicate ids, dangling
    /// references, unanswerable questions in an answer-selection dataset, ...).
    #[error("{0}")]
    Validation(String),

    /// Operand shapes do not satisfy an operation's contract.
    #[error("shape mismatch in {op}: {details}")]
    Shape { op: &'static str, details: String },

    /// A numeric operation produced NaN or infinity.
    #[error("non-finite values produced by {op}")]
    NonFinite { op: &'static str },

    /// A binary container (index or checkpoint) is malformed or has an
    /// unsupported format version.
    #[error("container {path}: {msg}")]
    Container { path: String, msg: String },
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn parse(path: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors that indicate a numeric failure rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}
