use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: bad dimensions, out-of-range parameters, bad files.
    #[error("validation error: {0}")]
    Validation(String),

    /// A matrix that must be positive definite is not.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Enumeration would exceed the configured candidate cap.
    #[error("enumeration refused: {count} candidate supports exceed cap {cap}")]
    TooManyCandidates { count: u128, cap: u128 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Singular(_) => 3,
            _ => 2,
        }
    }
}
