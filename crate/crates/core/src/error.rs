//! Crate-wide error type.

use std::fmt;

#[derive(Debug)]
pub enum Error {
    /// Paratope dimensions differ or a match has no valid convolution point.
    Matching(String),
    /// A sample or parameter violated a domain invariant.
    Domain(String),
    /// Scenario configuration rejected before any tick ran.
    Config(String),
    /// Log or repertoire file could not be read, written, or parsed.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Matching(msg) => write!(f, "matching error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
