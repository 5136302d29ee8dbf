//! Error type shared across the core modules.

use alloc::string::String;
use core::fmt;

/// Errors raised by core operations.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector argument had the wrong length.
    DimensionMismatch { expected: usize, got: usize },
    /// An argument was outside its documented range.
    InvalidInput(String),
    /// No settling horizon below the search cap satisfied the rate
    /// inequality; carries the worst observed decay ratio.
    HorizonNotFound { worst_ratio: f64, k_max: usize },
    /// A structural precondition (e.g. an affine disturbance channel) was
    /// violated by the supplied system.
    ContractViolation(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::HorizonNotFound { worst_ratio, k_max } => write!(
                f,
                "no settling horizon found below {k_max} (worst decay ratio {worst_ratio})"
            ),
            Error::ContractViolation(msg) => write!(f, "contract violation: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
