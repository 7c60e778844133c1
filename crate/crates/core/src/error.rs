use thiserror::Error;

/// Errors raised by the numerical core and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    #[error("{name} is not symmetric (max abs asymmetry {asymmetry:e})")]
    NotSymmetric { name: &'static str, asymmetry: f64 },

    #[error("{name} is not positive {kind} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositive {
        name: &'static str,
        kind: &'static str,
        min_eigenvalue: f64,
    },

    #[error("stabilizer does not stabilize the system: spectral radius of A + B K_stab is {radius}")]
    UnstableStabilizer { radius: f64 },

    #[error("matrix is not stable: spectral radius {radius} (must be < 1)")]
    Unstable { radius: f64 },

    #[error("Riccati iteration did not converge after {iterations} iterations (relative change {change:e})")]
    NonConvergence { iterations: usize, change: f64 },

    #[error("ill-conditioned matrix in {context}: condition number {condition:e}")]
    IllConditioned { context: &'static str, condition: f64 },

    #[error("eigenvalue computation failed in {context}")]
    EigenFailure { context: &'static str },

    #[error("bound not applicable: {reason}")]
    NotApplicable { reason: String },

    #[error("accumulator holds no usable pairs")]
    EmptyAccumulator,

    #[error("non-finite value in simulation at step {step}")]
    NonFinite { step: usize },

    #[error("invalid schedule: {reason}")]
    InvalidSchedule { reason: String },

    #[error("invalid argument: {reason}")]
    InvalidArgument { reason: String },

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
