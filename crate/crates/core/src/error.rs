use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("angle undefined at the origin of the (q, p) plane")]
    UndefinedAngle,

    #[error("non-finite state at step {step}")]
    NonFinite { step: u64 },

    #[error("section not reached within {steps} steps")]
    SectionNotReached { steps: u64 },

    #[error("singular jacobian (|det| = {det:e})")]
    SingularJacobian { det: f64 },

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("orbit does not wind around the center (angle range {range:.3} rad)")]
    NoWinding { range: f64 },

    #[error("not enough data: need at least {needed}, got {got}")]
    NotEnoughData { needed: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
