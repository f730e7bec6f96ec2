use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by construction, enumeration and evaluation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An expression, parameter set or schedule violates its invariants.
    #[error("construction rejected: {0}")]
    ConstructionRejected(String),

    #[error("invalid enumeration cutoff: {0}")]
    InvalidCutoff(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// `s` lies within the guard distance of a singularity.
    #[error("s = {s} is within {distance:.3e} of the singularity {nearest} ({context})")]
    SingularityProximity {
        s: Complex64,
        nearest: Complex64,
        distance: f64,
        context: String,
    },

    /// `s` lies left of (or on) the line where the requested representation is valid.
    #[error("s = {s} is outside the half-plane Re s > {abscissa}: {context}")]
    OutsideHalfPlane {
        s: Complex64,
        abscissa: f64,
        context: String,
    },

    /// A truncated series cannot be certified at the requested point.
    #[error("uncertified evaluation: {0}")]
    Uncertified(String),

    #[error("disk rejected: {0}")]
    DiskRejected(String),

    #[error("estimate unavailable: {0}")]
    EstimateUnavailable(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),
}

impl Error {
    /// True for failures caused by where the function was evaluated rather than by malformed input.
    pub fn is_numerical_domain(&self) -> bool {
        matches!(
            self,
            Error::SingularityProximity { .. }
                | Error::OutsideHalfPlane { .. }
                | Error::Uncertified(_)
                | Error::Overflow(_)
                | Error::EstimateUnavailable(_)
        )
    }
}

pub(crate) fn rejected(msg: impl Into<String>) -> Error {
    Error::ConstructionRejected(msg.into())
}
