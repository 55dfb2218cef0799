use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("size error: {what} (got {got}, need {need})")]
    Size {
        what: &'static str,
        got: usize,
        need: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("row alignment mismatch: {0}")]
    Alignment(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error in {path}: {kind} at {location}")]
    Parse {
        path: String,
        kind: ParseErrorKind,
        location: String,
    },

    #[error("unknown fusion strategy `{0}`")]
    UnknownStrategy(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    BadMagic,
    Truncated,
    NonNumeric,
    Ragged,
}

impl std::fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ParseErrorKind::BadMagic => "bad magic number",
            ParseErrorKind::Truncated => "truncated payload",
            ParseErrorKind::NonNumeric => "non-numeric cell",
            ParseErrorKind::Ragged => "ragged row",
        })
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the error's class: 1 numerical, 2 usage or
    /// configuration, 3 IO or parsing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Internal(_) => 1,
            Error::Validation(_)
            | Error::Size { .. }
            | Error::Dimension(_)
            | Error::Alignment(_)
            | Error::UnknownStrategy(_)
            | Error::Config(_) => 2,
            Error::Parse { .. } | Error::Io { .. } => 3,
        }
    }
}
