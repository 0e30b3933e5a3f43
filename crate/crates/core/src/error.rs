use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

use crate::bellman::SolveReport;

pub type Result<T> = core::result::Result<T, Error>;

/// Failure modes of the core library.
#[derive(Debug, Clone)]
pub enum Error {
    /// An input violated a documented precondition.
    Validation(String),
    /// Arithmetic produced a non-finite or otherwise unusable value.
    Numeric(String),
    /// Value iteration stopped at `max_iter` with the residual above tolerance.
    NonConvergence(Box<SolveReport>),
    /// A condition that valid inputs cannot produce.
    Internal(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Validation(msg) => write!(f, "invalid input: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric failure: {msg}"),
            Error::NonConvergence(report) => write!(
                f,
                "value iteration did not converge after {} iterations (residual span {:e})",
                report.iterations, report.residual_span
            ),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
