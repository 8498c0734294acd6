use std::path::PathBuf;

use thiserror::Error;

use crate::schedule::TraceRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data violates an invariant (non-finite entries, ragged rows, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// The operation needs state that is not present, e.g. a ground truth.
    #[error("missing state: {0}")]
    State(String),

    /// The objective blew up or went non-finite; the trace up to that point
    /// is attached for diagnosis.
    #[error("solver diverged at iteration {iter}: {reason}")]
    Diverged {
        iter: usize,
        reason: String,
        trace: Vec<TraceRecord>,
    },

    #[error("parse error in {source_name} at line {line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
