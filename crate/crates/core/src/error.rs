//! Crate-wide error type.

use std::io;

use thiserror::Error;

/// Errors produced by simulation, recovery, statistics, and file handling.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violated a documented precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    /// A data file could not be parsed. `line` is 1-based; 0 means the
    /// location could not be attributed to a single line.
    #[error("format error at line {line}: {message}")]
    Format { line: u64, message: String },
    /// An underlying I/O operation failed.
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Shorthand for [`Error::InvalidArgument`].
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// Shorthand for [`Error::Format`].
    pub fn format(line: u64, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    /// Prefix the error message with the file it arose from, keeping the
    /// variant (and thus the caller-visible failure class) unchanged.
    pub(crate) fn with_path(self, path: &std::path::Path) -> Self {
        let p = path.display();
        match self {
            Error::InvalidArgument(m) => Error::InvalidArgument(format!("{p}: {m}")),
            Error::Format { line, message } => Error::Format {
                line,
                message: format!("{p}: {message}"),
            },
            Error::Io(e) => Error::Io(io::Error::new(e.kind(), format!("{p}: {e}"))),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
