use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line front-end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or violated preconditions.
    Usage,
    /// Malformed, unsupported or inconsistent input data.
    Data,
    /// Numerical failure or non-convergence.
    Numeric,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("alignment error: {outside} of {total} sample points fall outside the volume")]
    Alignment { outside: usize, total: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("eigensolver did not converge after {iterations} iterations ({converged} pairs converged)")]
    NoConvergence {
        iterations: usize,
        converged: usize,
        partial: Box<crate::spectral::SpectralSlice>,
    },

    #[error("lambda {lambda} lies beyond the certified spectral coverage {coverage}")]
    Uncertified { lambda: f64, coverage: f64 },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::Uncertified { .. } => {
                ErrorKind::Usage
            }
            Error::Io(_)
            | Error::Format(_)
            | Error::Unsupported(_)
            | Error::Data(_)
            | Error::Alignment { .. } => ErrorKind::Data,
            Error::Numeric(_) | Error::NoConvergence { .. } => ErrorKind::Numeric,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
