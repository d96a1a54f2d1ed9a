use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("empty crop")]
    EmptyCrop,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("target {0} lies outside the frame")]
    TargetOutsideFrame(String),
    #[error("no background source")]
    NoBackgroundSource,
    #[error("image diagonal must be positive, got {0}")]
    NonPositiveDiagonal(f64),
    #[error("tracker used before initialization")]
    NotInitialized,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by bad input data rather than usage.
    pub fn is_data_error(&self) -> bool {
        !matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
