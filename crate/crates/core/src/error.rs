use alloc::string::String;
use core::fmt;

/// Errors raised by the estimators, tests and generators.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Invalid parameters for a distance function or scenario.
    Config(String),
    /// Arguments that are inconsistent with each other or out of range.
    Usage(String),
    /// Argument outside the domain of a numerical function.
    Domain(String),
    /// Sample data violating the dataset invariants.
    Data(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Usage(msg) => write!(f, "usage error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
