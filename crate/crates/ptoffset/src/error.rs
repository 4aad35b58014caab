use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Error from the IO layer or a pipeline stage.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] ptoffset_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{what} line {line}: {reason}")]
    Parse { what: &'static str, line: usize, reason: String },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(what: &'static str, line: usize, reason: impl Into<String>) -> Self {
        Error::Parse { what, line, reason: reason.into() }
    }

    /// Process exit status: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            Error::Core(e) if e.is_numeric() => 3,
            Error::Core(ptoffset_core::Error::InvalidArgument { .. }) => 1,
            _ => 2,
        }
    }
}
