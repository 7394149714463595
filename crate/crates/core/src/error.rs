use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("path loss is singular at r = {0} m")]
    SingularDistance(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("expected base station count {expected:.0} exceeds the cap of {cap}")]
    TooManyBaseStations { expected: f64, cap: usize },

    #[error("quadrature did not converge: value {value:e}, error estimate {error:e} after {evaluations} evaluations")]
    QuadratureFailed { value: f64, error: f64, evaluations: usize },

    #[error("quadrature hit a non-finite integrand value at x = {0}")]
    NonFiniteIntegrand(f64),

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("probability {value} lies outside [0, 1] beyond its error estimate {error:e}")]
    ProbabilityOutOfRange { value: f64, error: f64 },

    #[error("inclusion-exclusion lost precision: cancellation error {error:e} exceeds {tolerance:e}")]
    LossOfPrecision { error: f64, tolerance: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParam {
        name,
        reason: reason.into(),
    }
}
