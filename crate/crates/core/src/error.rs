use thiserror::Error;

use crate::linalg::c64;

/// Errors produced by the BdG toolkit.
///
/// The variants fall in two families: structural/validation problems with
/// the inputs, and numerical failures (gap violations, loss of positivity)
/// that depend on the parameters rather than on how the call was made.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("gap violation: eigenvalue {eigenvalue} lies within {margin:e} of the contour ({context})")]
    GapViolation {
        eigenvalue: c64,
        margin: f64,
        context: String,
    },

    #[error("stability requirement violated: {0}")]
    Stability(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl Error {
    /// Numerical failures are distinguished from input errors by the CLI.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::GapViolation { .. } | Error::Stability(_) | Error::Domain(_) | Error::Linalg(_)
        )
    }
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
