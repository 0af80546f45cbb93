//! Error type shared across the crate.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by simulation, reconstruction, training, and file I/O.
#[derive(Debug)]
pub enum Error {
    /// A caller-supplied value violates a documented precondition.
    InvalidArgument(String),
    /// A configuration is internally inconsistent or cannot support the
    /// requested operation (e.g. the time axis is too short for a scatterer).
    Config(String),
    /// A measurement could not be made on the given data (e.g. no half-maximum
    /// crossing exists for a width estimate).
    Measurement(String),
    /// A binary file does not conform to the container format. `offset` is the
    /// byte position at which the problem was detected.
    Format { offset: u64, message: String },
    /// A container file was written by an unsupported format version.
    UnsupportedVersion { found: u32, expected: u32 },
    /// An underlying I/O operation failed.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Measurement(msg) => write!(f, "measurement failed: {msg}"),
            Error::Format { offset, message } => {
                write!(f, "format error at byte {offset}: {message}")
            }
            Error::UnsupportedVersion { found, expected } => {
                write!(f, "unsupported container version {found} (expected {expected})")
            }
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
