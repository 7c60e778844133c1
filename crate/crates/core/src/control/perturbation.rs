//! Numerical check of the Riccati perturbation bounds: for `(A′, B′)` within
//! `1/(c‖P⋆‖⁵)` of `(A, B)` the alternate DARE is solvable and its gain is
//! close to `K⋆` in the five senses listed in [`BoundKind`].

use crate::control::lyapunov::p_star_of_k;
use crate::control::riccati::{solve_dare_matrices, RiccatiSolution};
use crate::control::LqrProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::scalar::Real;

/// Radius constant `c` in `max(‖A′−A‖, ‖B′−B‖) < 1/(c‖P⋆‖⁵)`.
pub const DEFAULT_RADIUS_CONSTANT: f64 = 54.0;
/// Absolute floor added to each right-hand side, relative to `1 + ‖P⋆‖`,
/// covering solver round-off.
const NUMERICAL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// `‖P′‖ ≤ 1.09‖P⋆‖`
    AltRiccatiNorm,
    /// `‖B(K′−K⋆)‖ ≤ 32‖P⋆‖^{7/2} err`
    GainMismatchThroughB,
    /// `‖R^{1/2}(K′−K⋆)‖ ≤ 28‖P⋆‖^{7/2} err`
    GainMismatchWeighted,
    /// `‖P⋆(K′)−P⋆‖ ≤ 142‖P⋆‖⁸ err²`
    CostGap,
    /// `‖P⋆(K′)‖ ≤ 1.05‖P⋆‖`
    CostNorm,
}

impl BoundKind {
    pub const ALL: [BoundKind; 5] = [
        BoundKind::AltRiccatiNorm,
        BoundKind::GainMismatchThroughB,
        BoundKind::GainMismatchWeighted,
        BoundKind::CostGap,
        BoundKind::CostNorm,
    ];

    pub fn label(self) -> &'static str {
        match self {
            BoundKind::AltRiccatiNorm => "|P'| <= 1.09|P*|",
            BoundKind::GainMismatchThroughB => "|B(K'-K*)| <= 32|P*|^3.5 err",
            BoundKind::GainMismatchWeighted => "|R^1/2(K'-K*)| <= 28|P*|^3.5 err",
            BoundKind::CostGap => "|P*(K')-P*| <= 142|P*|^8 err^2",
            BoundKind::CostNorm => "|P*(K')| <= 1.05|P*|",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationReport {
    /// `max(‖A′−A‖, ‖B′−B‖)`.
    pub err: f64,
    pub radius: f64,
    /// Whether the alternate DARE produced a stabilizing solution.
    pub alt_solved: bool,
    pub checks: Vec<BoundCheck>,
}

impl PerturbationReport {
    pub fn all_pass(&self) -> bool {
        self.alt_solved && self.checks.iter().all(|c| c.pass)
    }
}

pub fn check_perturbation_bounds<T: Real>(
    problem: &LqrProblem<T>,
    a_alt: &Mat<T>,
    b_alt: &Mat<T>,
) -> Result<PerturbationReport> {
    check_perturbation_bounds_with(problem, a_alt, b_alt, T::lit(DEFAULT_RADIUS_CONSTANT))
}

/// As [`check_perturbation_bounds`] with an explicit radius constant.
pub fn check_perturbation_bounds_with<T: Real>(
    problem: &LqrProblem<T>,
    a_alt: &Mat<T>,
    b_alt: &Mat<T>,
    radius_constant: T,
) -> Result<PerturbationReport> {
    linalg::check_shape(a_alt, "A'", problem.dx(), problem.dx())?;
    linalg::check_shape(b_alt, "B'", problem.dx(), problem.du())?;

    // Reference and alternate DAREs are solved identically so that an
    // unperturbed pair reproduces K⋆ bit for bit.
    let tol = T::lit(1e-13).max(T::default_epsilon() * T::lit(100.0));
    let riccati = solve(problem.a(), problem.b(), problem, tol)?;

    let p_norm = linalg::op_norm(&riccati.p);
    let err = linalg::op_norm(&(a_alt - problem.a())).max(linalg::op_norm(&(b_alt - problem.b())));
    let radius = T::one() / (radius_constant * p_norm.powi(5));
    if !(err < radius) {
        return Err(Error::NotApplicable {
            reason: format!(
                "perturbation {} is not inside the radius {}",
                err.as_f64(),
                radius.as_f64()
            ),
        });
    }

    let alt = match solve(a_alt, b_alt, problem, tol) {
        Ok(sol) => sol,
        Err(_) => {
            return Ok(PerturbationReport {
                err: err.as_f64(),
                radius: radius.as_f64(),
                alt_solved: false,
                checks: Vec::new(),
            })
        }
    };

    // Both cost matrices go through the same Lyapunov solver so that K′ = K⋆
    // yields an exact zero gap.
    let p_ref = p_star_of_k(problem, &riccati.k)?;
    let p_alt_gain = match p_star_of_k(problem, &alt.k) {
        Ok(p) => p,
        Err(Error::Unstable { .. }) => {
            return Ok(PerturbationReport {
                err: err.as_f64(),
                radius: radius.as_f64(),
                alt_solved: false,
                checks: Vec::new(),
            })
        }
        Err(e) => return Err(e),
    };

    let dk = &alt.k - &riccati.k;
    let floor = T::lit(NUMERICAL_FLOOR) * (T::one() + p_norm);
    let p35 = p_norm.powi(3) * p_norm.sqrt();
    let r_half = linalg::sqrt_psd(problem.r());
    let pairs = [
        (BoundKind::AltRiccatiNorm, linalg::op_norm(&alt.p), T::lit(1.09) * p_norm),
        (
            BoundKind::GainMismatchThroughB,
            linalg::op_norm(&(problem.b() * &dk)),
            T::lit(32.0) * p35 * err,
        ),
        (
            BoundKind::GainMismatchWeighted,
            linalg::op_norm(&(r_half * &dk)),
            T::lit(28.0) * p35 * err,
        ),
        (
            BoundKind::CostGap,
            linalg::op_norm(&(&p_alt_gain - &p_ref)),
            T::lit(142.0) * p_norm.powi(8) * err * err,
        ),
        (BoundKind::CostNorm, linalg::op_norm(&p_alt_gain), T::lit(1.05) * p_norm),
    ];
    let checks = pairs
        .into_iter()
        .map(|(kind, lhs, rhs)| BoundCheck {
            kind,
            lhs: lhs.as_f64(),
            rhs: rhs.as_f64(),
            pass: lhs <= rhs + floor,
        })
        .collect();
    Ok(PerturbationReport {
        err: err.as_f64(),
        radius: radius.as_f64(),
        alt_solved: true,
        checks,
    })
}

fn solve<T: Real>(a: &Mat<T>, b: &Mat<T>, problem: &LqrProblem<T>, tol: T) -> Result<RiccatiSolution<T>> {
    solve_dare_matrices(a, b, problem.q(), problem.r(), tol, 1_000_000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::lyapunov::riccati_for;

    fn radius_of(prob: &LqrProblem<f64>) -> f64 {
        let sol = riccati_for(prob).unwrap();
        1.0 / (54.0 * linalg::op_norm(&sol.p).powi(5))
    }

    fn dim2() -> LqrProblem<f64> {
        LqrProblem::new(
            Mat::from_row_slice(2, 2, &[0.9, 0.2, 0.0, 0.7]),
            Mat::from_row_slice(2, 1, &[0.0, 1.0]),
            Mat::identity(2, 2) * 1.5,
            Mat::identity(1, 1),
            Mat::zeros(1, 2),
        )
        .unwrap()
    }

    #[test]
    fn identical_pair_passes_with_zero_slack_consumed() {
        let prob = dim2();
        let rep = check_perturbation_bounds(&prob, prob.a(), prob.b()).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert_eq!(rep.err, 0.0);
        for c in &rep.checks {
            if matches!(
                c.kind,
                BoundKind::GainMismatchThroughB | BoundKind::GainMismatchWeighted | BoundKind::CostGap
            ) {
                assert_eq!(c.lhs, 0.0, "{c:?}");
            }
        }
    }

    #[test]
    fn outside_radius_is_not_applicable() {
        let prob = dim2();
        let radius = radius_of(&prob);
        let mut a_alt = prob.a().clone();
        a_alt[(0, 0)] += 2.0 * radius;
        let err = check_perturbation_bounds(&prob, &a_alt, prob.b()).unwrap_err();
        assert!(matches!(err, Error::NotApplicable { .. }));
    }

    #[test]
    fn small_perturbation_passes() {
        let prob = dim2();
        let radius = radius_of(&prob);
        let mut a_alt = prob.a().clone();
        a_alt[(0, 1)] += 0.1 * radius;
        let mut b_alt = prob.b().clone();
        b_alt[(0, 0)] -= 0.05 * radius;
        let rep = check_perturbation_bounds(&prob, &a_alt, &b_alt).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
    }
}
