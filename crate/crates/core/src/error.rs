use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two buffers or maps that must agree in size do not.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    /// A file could not be parsed.
    #[error("{}: parse error at byte {offset}: {message}", path.display())]
    Parse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    /// Too few reliable guidance pixels to fit an alignment.
    #[error("sparse guidance: {support} reliable pixels, need at least {required}")]
    SparseGuidance { support: usize, required: usize },

    /// A loss reduction over an empty pixel set.
    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    /// A configuration that admits no feasible value.
    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    /// The computation succeeded but produced an unusable result.
    #[error("degenerate result: {0}")]
    Degenerate(String),

    /// An internal invariant check failed.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::DimensionMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, offset: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            offset,
            message: message.into(),
        }
    }

    /// Process exit code for the command line front end.
    ///
    /// 2 for bad input, 3 for degenerate results, 4 for internal invariant failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) | Error::SparseGuidance { .. } => 3,
            Error::Invariant(_) => 4,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
