use crate::control::LqrProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::scalar::Real;

pub const DEFAULT_DARE_TOL: f64 = 1e-11;
pub const DEFAULT_DARE_MAX_ITER: usize = 100_000;

/// Iterates whose Frobenius norm exceeds this are treated as divergent.
const DIVERGENCE_NORM: f64 = 1e30;
const MAX_GAIN_CONDITION: f64 = 1e14;

/// Stabilizing solution of the discrete algebraic Riccati equation.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution<T: Real> {
    pub p: Mat<T>,
    pub k: Mat<T>,
    /// Frobenius norm of the DARE defect at `p`.
    pub residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// `Q + AᵀPA − AᵀPB(R + BᵀPB)⁻¹BᵀPA`, the Riccati map.
pub fn dare_map<T: Real>(a: &Mat<T>, b: &Mat<T>, q: &Mat<T>, r: &Mat<T>, p: &Mat<T>) -> Result<Mat<T>> {
    let pa = p * a;
    let bt = b.transpose();
    let gram = r + &bt * p * b;
    let rhs = &bt * &pa;
    let solved = solve_spd(&gram, &rhs, "dare_map")?;
    let next = q + a.transpose() * &pa - pa.transpose() * b * solved;
    Ok(linalg::symmetrize(&next))
}

/// Frobenius norm of `AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA + Q − P`.
pub fn dare_residual<T: Real>(a: &Mat<T>, b: &Mat<T>, q: &Mat<T>, r: &Mat<T>, p: &Mat<T>) -> Result<T> {
    Ok(linalg::frobenius(&(dare_map(a, b, q, r, p)? - p)))
}

/// Solves the DARE for the problem's true `(A, B)`.
pub fn solve_dare<T: Real>(problem: &LqrProblem<T>, tol: T, max_iter: usize) -> Result<RiccatiSolution<T>> {
    solve_dare_matrices(problem.a(), problem.b(), problem.q(), problem.r(), tol, max_iter)
}

/// Value iteration `P ← Q + AᵀPA − AᵀPB(R+BᵀPB)⁻¹BᵀPA` from `P₀ = Q`,
/// stopped once the relative Frobenius change is at most `tol`.
///
/// Works on arbitrary `(A, B)` such as least-squares estimates; an
/// unstabilizable pair shows up as divergence or exhaustion of `max_iter`.
pub fn solve_dare_matrices<T: Real>(
    a: &Mat<T>,
    b: &Mat<T>,
    q: &Mat<T>,
    r: &Mat<T>,
    tol: T,
    max_iter: usize,
) -> Result<RiccatiSolution<T>> {
    let dx = a.nrows();
    linalg::check_square(a, "A", dx)?;
    let du = b.ncols();
    linalg::check_shape(b, "B", dx, du)?;
    linalg::check_square(q, "Q", dx)?;
    linalg::check_square(r, "R", du)?;
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument {
            reason: "DARE tolerance must be positive".into(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence {
            iterations: 0,
            change: f64::NAN,
        });
    }

    let mut p = linalg::symmetrize(q);
    let mut change = T::one();
    for it in 1..=max_iter {
        let next = dare_map(a, b, q, r, &p)?;
        let norm_next = linalg::frobenius(&next);
        if !norm_next.is_finite() || norm_next > T::lit(DIVERGENCE_NORM) {
            return Err(Error::NonConvergence {
                iterations: it,
                change: f64::INFINITY,
            });
        }
        let diff = linalg::frobenius(&(&next - &p));
        change = if norm_next > T::zero() { diff / norm_next } else { diff };
        p = next;
        if change <= tol {
            let k = optimal_gain_matrices(a, b, r, &p)?;
            let residual = dare_residual(a, b, q, r, &p)?;
            let radius = linalg::spectral_radius(&(a + b * &k))?;
            if !(radius < T::one()) {
                return Err(Error::NonConvergence {
                    iterations: it,
                    change: change.as_f64(),
                });
            }
            let converged = residual <= tol * (T::one() + linalg::frobenius(&p));
            return Ok(RiccatiSolution {
                p,
                k,
                residual,
                iterations: it,
                converged,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: max_iter,
        change: change.as_f64(),
    })
}

/// `K = −(R + BᵀPB)⁻¹BᵀPA`.
pub fn optimal_gain<T: Real>(p: &Mat<T>, problem: &LqrProblem<T>) -> Result<Mat<T>> {
    linalg::check_square(p, "P", problem.dx())?;
    optimal_gain_matrices(problem.a(), problem.b(), problem.r(), p)
}

pub(crate) fn optimal_gain_matrices<T: Real>(a: &Mat<T>, b: &Mat<T>, r: &Mat<T>, p: &Mat<T>) -> Result<Mat<T>> {
    let bt = b.transpose();
    let gram = r + &bt * p * b;
    let ev = linalg::symmetric_eigenvalues(&gram);
    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
    if !(lo > T::zero()) || hi / lo > T::lit(MAX_GAIN_CONDITION) {
        return Err(Error::IllConditioned {
            context: "R + BᵀPB",
            condition: if lo > T::zero() { (hi / lo).as_f64() } else { f64::INFINITY },
        });
    }
    Ok(-solve_spd(&gram, &(&bt * p * a), "optimal_gain")?)
}

fn solve_spd<T: Real>(gram: &Mat<T>, rhs: &Mat<T>, context: &'static str) -> Result<Mat<T>> {
    let chol = linalg::symmetrize(gram)
        .cholesky()
        .ok_or(Error::IllConditioned {
            context,
            condition: f64::INFINITY,
        })?;
    Ok(chol.solve(rhs))
}
