//! Error type shared by all estimation and testing routines.
//!
//! Three failure classes are distinguished. Argument errors are caller
//! mistakes (dimension mismatches, out-of-range options) and are always
//! detectable before any numerics run. Estimation errors are data-dependent
//! failures of a well-posed routine (singular covariance, rank-deficient
//! design). Degenerate-fit signals mark inputs on which the requested
//! quantity is not defined at all (zero residual vector, constant response
//! where variation is required).

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure taxonomy for model fitting, dimension reduction and testing.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Caller-supplied arguments are inconsistent or out of range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A data-dependent estimation step failed (singularity, deficient rank).
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// The input admits no meaningful answer (for example all-zero residuals).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateFit(msg.into())
    }
}
