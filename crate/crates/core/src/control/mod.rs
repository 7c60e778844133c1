//! Dense control-theoretic primitives: Riccati and Lyapunov solvers, gains,
//! transient-growth constants and perturbation-bound verifiers.

mod lyapunov;
mod perturbation;
mod problem;
mod riccati;
mod stability;

pub use lyapunov::{
    cost_difference_residual, p_star_of_k, riccati_for, solve_lyapunov, DEFAULT_LYAPUNOV_TOL,
};
pub use perturbation::{
    check_perturbation_bounds, check_perturbation_bounds_with, BoundCheck, BoundKind,
    PerturbationReport, DEFAULT_RADIUS_CONSTANT,
};
pub use problem::{LqrProblem, ValidationWarning};
pub use riccati::{
    dare_map, dare_residual, optimal_gain, solve_dare, solve_dare_matrices, RiccatiSolution,
    DEFAULT_DARE_MAX_ITER, DEFAULT_DARE_TOL,
};
pub use stability::{
    perturbed_gain_bound, spectral_radius, toeplitz_gain, StabilityProfile, DEFAULT_ENVELOPE_TOL,
};
