use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants line up with the CLI exit codes: parameter problems map to
/// 2, non-convergence to 1 and detected invariant violations to 3.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} did not converge (value {value:e}, error estimate {err_est:e})")]
    NonConvergence { what: &'static str, value: f64, err_est: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invariant violated: {0}")]
    Violation(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
