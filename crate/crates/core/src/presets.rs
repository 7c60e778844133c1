//! Named benchmark systems.

use crate::control::{self, LqrProblem};
use crate::linalg::Mat;

pub const PRESET_NAMES: [&str; 3] = ["scalar-easy", "dim2-default", "dim3-marginal"];

/// Relative perturbation of the system the preset stabilizers are designed on.
pub const STABILIZER_DESIGN_PERTURBATION: f64 = 0.05;

pub fn preset(name: &str) -> Option<LqrProblem<f64>> {
    match name {
        "scalar-easy" => Some(scalar_easy()),
        "dim2-default" => Some(dim2_default()),
        "dim3-marginal" => Some(dim3_marginal()),
        _ => None,
    }
}

/// `a = b = 1`, `q = 2`, `r = 1`, `K_∘ = −0.5`.
pub fn scalar_easy() -> LqrProblem<f64> {
    LqrProblem::new(
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 1.0),
        Mat::from_element(1, 1, 2.0),
        Mat::identity(1, 1),
        Mat::from_element(1, 1, -0.5),
    )
    .expect("scalar-easy is valid")
}

/// `A = [[1.01, 0.1], [0, 0.99]]` rescaled to spectral radius 1.005,
/// `B = I`, `Q = 2I`, `R = I`.
pub fn dim2_default() -> LqrProblem<f64> {
    let a = Mat::from_row_slice(2, 2, &[1.01, 0.1, 0.0, 0.99]) * (1.005 / 1.01);
    with_designed_stabilizer(a, Mat::identity(2, 2))
}

/// Three states, two inputs; the middle state is only reachable through
/// the coupling in `A`.
pub fn dim3_marginal() -> LqrProblem<f64> {
    let a = Mat::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.0, 0.98, 0.1, 0.0, 0.0, 0.95]);
    let b = Mat::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
    with_designed_stabilizer(a, b)
}

/// `Q = 2I`, `R = I` and `K_∘` optimal for `((1+δ)A, (1−δ)B)`.
fn with_designed_stabilizer(a: Mat<f64>, b: Mat<f64>) -> LqrProblem<f64> {
    let (dx, du) = (a.nrows(), b.ncols());
    let q = Mat::identity(dx, dx) * 2.0;
    let r = Mat::identity(du, du);
    let d = STABILIZER_DESIGN_PERTURBATION;
    let design = control::solve_dare_matrices(
        &(&a * (1.0 + d)),
        &(&b * (1.0 - d)),
        &q,
        &r,
        control::DEFAULT_DARE_TOL,
        control::DEFAULT_DARE_MAX_ITER,
    )
    .expect("design system is stabilizable");
    LqrProblem::new(a, b, q, r, design.k).expect("designed stabilizer stabilizes the true system")
}
