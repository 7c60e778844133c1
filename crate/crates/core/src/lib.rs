//! Certainty-equivalence adaptive control for online LQR.
//!
//! The controller learns `(A, B)` by least squares, plugs the estimate into
//! the Riccati equation on a lazy schedule and falls back to a known
//! stabilizer whenever a hysteresis rule on the state energy, or a
//! scenario-specific excitation gate, says the learned gain is not safe.
//!
//! Linear algebra is generic over [`Real`] (`f32` or `f64`); the
//! simulation harness runs in `f64`.

pub mod cec;
pub mod control;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod presets;
pub mod random;
pub mod scalar;
pub mod suites;
pub mod system;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat = linalg::Mat<f64>;
pub type Vector = linalg::Vector<f64>;
pub type LqrProblem = control::LqrProblem<f64>;
pub type RiccatiSolution = control::RiccatiSolution<f64>;
pub type StabilityProfile = control::StabilityProfile<f64>;
pub type CecState = cec::CecState<f64>;
pub type GramAccumulator = estimator::GramAccumulator<f64>;
pub type Estimate = estimator::Estimate<f64>;
pub type SimState = system::SimState<f64>;
