use std::fmt;

use thiserror::Error;

/// Which coordinate of a dataset a tie was found in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    /// Two observations share a value; `first` and `second` are 0-based row indices.
    #[error("tied {axis} values at rows {first} and {second}")]
    Tie {
        axis: Axis,
        first: usize,
        second: usize,
    },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }

    /// Process exit code for the command-line front end.
    ///
    /// 2 parse, 3 ties, 4 unsupported, 1 everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Tie { .. } => 3,
            Error::Unsupported(_) => 4,
            Error::Domain(_) | Error::Numeric(_) | Error::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
