//! Random instance generators used by the verification suites.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::control::{self, LqrProblem};
use crate::linalg::{self, Mat};

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat<f64> {
    Mat::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random square matrix rescaled to spectral radius `radius`.
pub fn matrix_with_radius<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Mat<f64> {
    loop {
        let m = gaussian_matrix(rng, d, d);
        let rho = linalg::spectral_radius(&m).unwrap_or(0.0);
        if rho > 1e-3 {
            return m * (radius / rho);
        }
    }
}

/// Random stable matrix with spectral radius uniform in `[0, max_radius]`.
pub fn stable_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize, max_radius: f64) -> Mat<f64> {
    let radius = rng.random_range(0.0..=max_radius);
    matrix_with_radius(rng, d, radius)
}

/// Random `Q ⪰ I`.
pub fn cost_matrix<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Mat<f64> {
    let g = gaussian_matrix(rng, d, d) * 0.5;
    Mat::identity(d, d) * 1.5 + &g * g.transpose()
}

/// Random stabilizable instance with `d_x = dx`, `d_u = du`, open-loop
/// spectral radius in `[0.3, radius_max]`, `R = I` and `K_∘ = K⋆`.
pub fn stabilizable_problem<R: Rng + ?Sized>(rng: &mut R, dx: usize, du: usize, radius_max: f64) -> LqrProblem<f64> {
    loop {
        let radius = rng.random_range(0.3..=radius_max);
        let a = matrix_with_radius(rng, dx, radius);
        let b = gaussian_matrix(rng, dx, du);
        let q = cost_matrix(rng, dx);
        let r = Mat::identity(du, du);
        // A generic B is controllable; the DARE confirms stabilizability.
        if let Ok(sol) = control::solve_dare_matrices(&a, &b, &q, &r, 1e-12, 200_000) {
            if let Ok(p) = LqrProblem::new(a, b, q, r, sol.k) {
                return p;
            }
        }
    }
}
