//! Error type shared by all modules.

use alloc::string::String;
use core::fmt;

/// Errors produced by the solvers and Gram constructors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A precondition on the inputs was violated (shape mismatch, infeasible
    /// parameter, non-finite input, ...).
    InvalidArgument(String),
    /// The computation left the numerically valid regime (negative curvature
    /// in a subproblem, non-finite objective, ...).
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
