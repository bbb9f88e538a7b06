use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A record could not be decoded. `line` is 1-based.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown behavior label '{0}'")]
    UnknownBehavior(String),

    /// Structurally valid input that violates a data invariant.
    #[error("{0}")]
    Invalid(String),

    #[error("missing behavior labels for instances: {}", .0.join(", "))]
    MissingLabels(Vec<String>),

    #[error("no instances with turn_index >= 2 to score")]
    NoScoredInstances,

    /// Undefined statistic or failed fit.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    /// True for failures of the numeric/training kind (as opposed to bad input data).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}
