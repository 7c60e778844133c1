use crate::control::{riccati, LqrProblem, RiccatiSolution};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::scalar::Real;

pub const DEFAULT_LYAPUNOV_TOL: f64 = 1e-14;

/// Inputs with spectral radius at or above `1 − STABILITY_MARGIN` are rejected.
const STABILITY_MARGIN: f64 = 1e-9;
const MAX_DOUBLINGS: usize = 128;

pub(crate) fn check_stable<T: Real>(m: &Mat<T>) -> Result<T> {
    let radius = linalg::spectral_radius(m)?;
    if !(radius < T::one() - T::lit(STABILITY_MARGIN)) {
        return Err(Error::Unstable {
            radius: radius.as_f64(),
        });
    }
    Ok(radius)
}

/// Solves `X = MᵀXM + N` for stable `M` by the doubling iteration
/// `X ← X + M_kᵀ X M_k`, `M_k ← M_k²`, which sums `2^k` terms of the series
/// `Σ (Mʲ)ᵀ N Mʲ` per step. Stops once `‖M_k‖² ≤ tol`.
pub fn solve_lyapunov<T: Real>(m: &Mat<T>, n: &Mat<T>, tol: T) -> Result<Mat<T>> {
    let d = m.nrows();
    linalg::check_square(m, "M", d)?;
    linalg::check_square(n, "N", d)?;
    check_stable(m)?;

    let mut x = linalg::symmetrize(n);
    let mut mk = m.clone();
    for _ in 0..MAX_DOUBLINGS {
        let norm = linalg::op_norm(&mk);
        if norm * norm <= tol {
            return Ok(linalg::symmetrize(&x));
        }
        x = &x + mk.transpose() * &x * &mk;
        mk = &mk * &mk;
    }
    // ρ(M) < 1 guarantees ‖M^(2^k)‖ → 0; this only triggers for radius
    // within a hair of the margin.
    Err(Error::Unstable {
        radius: linalg::spectral_radius(m)?.as_f64(),
    })
}

/// Cost matrix of the feedback `u = K x`: `𝓛(A + BK, Q + KᵀRK)`.
pub fn p_star_of_k<T: Real>(problem: &LqrProblem<T>, k: &Mat<T>) -> Result<Mat<T>> {
    linalg::check_shape(k, "K", problem.du(), problem.dx())?;
    let closed = problem.closed_loop(k);
    let cost = problem.q() + k.transpose() * problem.r() * k;
    solve_lyapunov(&closed, &cost, T::lit(DEFAULT_LYAPUNOV_TOL))
}

/// Frobenius norm of
/// `[P⋆(K) − P⋆] − 𝓛(A+BK, (K−K⋆)ᵀ(R + BᵀP⋆B)(K−K⋆))`,
/// the defect of the cost-difference identity for a stabilizing `K`.
pub fn cost_difference_residual<T: Real>(
    problem: &LqrProblem<T>,
    riccati: &RiccatiSolution<T>,
    k: &Mat<T>,
) -> Result<T> {
    let lhs = p_star_of_k(problem, k)? - &riccati.p;
    let dk = k - &riccati.k;
    let weight = problem.r() + problem.b().transpose() * &riccati.p * problem.b();
    let rhs = solve_lyapunov(
        &problem.closed_loop(k),
        &(dk.transpose() * weight * &dk),
        T::lit(DEFAULT_LYAPUNOV_TOL),
    )?;
    Ok(linalg::frobenius(&(lhs - rhs)))
}

/// Convenience: solves the true DARE with default settings.
pub fn riccati_for<T: Real>(problem: &LqrProblem<T>) -> Result<RiccatiSolution<T>> {
    riccati::solve_dare(
        problem,
        T::lit(riccati::DEFAULT_DARE_TOL),
        riccati::DEFAULT_DARE_MAX_ITER,
    )
}
