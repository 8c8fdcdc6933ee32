use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// The stream is not in the declared format at all (bad header, unreadable framing).
    #[error("format error: {0}")]
    Format(String),

    /// Input outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate tail: all {0} tail values are equal")]
    DegenerateTail(usize),

    #[error("node {0:?} has no flow-index entry")]
    MissingNode(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        if err.is_io_error() {
            match err.into_kind() {
                csv::ErrorKind::Io(e) => Error::Io(e),
                other => Error::Format(format!("{other:?}")),
            }
        } else {
            Error::Format(err.to_string())
        }
    }
}
