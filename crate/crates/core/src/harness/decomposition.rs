use crate::control::{p_star_of_k, LqrProblem, RiccatiSolution};
use crate::error::{Error, Result};
use crate::harness::episode::StepDetail;
use crate::linalg::{self, Mat, Vector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    pub steps: usize,
    /// Largest `|‖x_t‖²_{P⋆,t} − (‖x_{t+1}−Bαξ−η‖²_{P̃} + ‖x_t‖²_Q + ‖u_t−αξ‖²_R)|`.
    pub max_abs_residual: f64,
    /// Same residual divided by `1 + ‖x_t‖²_{P⋆,t}`.
    pub max_rel_residual: f64,
    /// Largest residual of the expanded per-step cost identity.
    pub max_expanded_residual: f64,
    /// Steps where `P̃_t = P⋆(K̃_t)` rather than `P⋆`.
    pub local_steps: usize,
}

/// `P̃ = P⋆(K̃)` when `‖B(K̃−K⋆)‖ < 1/(4‖P⋆‖^{3/2})` and `‖P⋆(K̃)‖ ≤ 2‖P⋆‖`,
/// otherwise `P⋆`.
pub fn p_tilde(problem: &LqrProblem<f64>, riccati: &RiccatiSolution<f64>, gain: &Mat<f64>) -> (Mat<f64>, bool) {
    let p_norm = linalg::op_norm(&riccati.p);
    let near = linalg::op_norm(&(problem.b() * (gain - &riccati.k))) < 1.0 / (4.0 * p_norm.powf(1.5));
    if near {
        if let Ok(pk) = p_star_of_k(problem, gain) {
            if linalg::op_norm(&pk) <= 2.0 * p_norm {
                return (pk, true);
            }
        }
    }
    (riccati.p.clone(), false)
}

/// Evaluates both sides of the per-step identity behind the exact regret
/// decomposition on recorded steps (`α_t = 1` with `ξ_t` the recorded
/// perturbation, zero when none was added).
///
/// The expanded identity checked alongside is
/// `‖x‖²_Q + ‖u‖²_R = ‖x‖²_{P⋆,t} − ‖x'‖²_{P̃} + ‖η‖²_{P̃} + ‖ξ‖²_{BᵀP̃B+R}
///  + 2(Bξ+η)ᵀP̃(A+BK̃)x + 2ηᵀP̃Bξ + 2ξᵀRK̃x`.
pub fn regret_decomposition_check(
    problem: &LqrProblem<f64>,
    riccati: &RiccatiSolution<f64>,
    steps: &[StepDetail],
) -> Result<DecompositionReport> {
    if steps.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    let (a, b, q, r) = (problem.a(), problem.b(), problem.q(), problem.r());
    let mut rep = DecompositionReport {
        steps: steps.len(),
        max_abs_residual: 0.0,
        max_rel_residual: 0.0,
        max_expanded_residual: 0.0,
        local_steps: 0,
    };
    for s in steps {
        let (pt, local) = p_tilde(problem, riccati, &s.gain);
        rep.local_steps += local as usize;
        let closed = a + b * &s.gain;
        let p_star_t = closed.transpose() * &pt * &closed + q + s.gain.transpose() * r * &s.gain;
        let xi = &s.perturbation;

        let lhs = linalg::quad_form(&p_star_t, &s.x);
        let shifted: Vector<f64> = &s.x_next - b * xi - &s.eta;
        let rhs = linalg::quad_form(&pt, &shifted) + linalg::quad_form(q, &s.x) + linalg::quad_form(r, &(&s.u - xi));
        let res = (lhs - rhs).abs();
        rep.max_abs_residual = rep.max_abs_residual.max(res);
        rep.max_rel_residual = rep.max_rel_residual.max(res / (1.0 + lhs.abs()));

        let cost = linalg::quad_form(q, &s.x) + linalg::quad_form(r, &s.u);
        let bxi = b * xi;
        let cx = &closed * &s.x;
        let expanded = lhs - linalg::quad_form(&pt, &s.x_next)
            + linalg::quad_form(&pt, &s.eta)
            + linalg::quad_form(&(b.transpose() * &pt * b + r), xi)
            + 2.0 * (&bxi + &s.eta).dot(&(&pt * &cx))
            + 2.0 * s.eta.dot(&(&pt * &bxi))
            + 2.0 * xi.dot(&(r * (&s.gain * &s.x)));
        rep.max_expanded_residual = rep.max_expanded_residual.max((cost - expanded).abs());
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::riccati_for;
    use crate::presets;

    #[test]
    fn deterministic_fixed_gain_reduces_to_lyapunov_equality() {
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        let k = Mat::from_element(1, 1, -0.5);
        let mut x = Vector::from_element(1, 1.0);
        let mut steps = vec![];
        for _ in 0..20 {
            let u = &k * &x;
            let xn = prob.a() * &x + prob.b() * &u;
            steps.push(StepDetail {
                x: x.clone(),
                u,
                x_next: xn.clone(),
                eta: Vector::zeros(1),
                perturbation: Vector::zeros(1),
                gain: k.clone(),
            });
            x = xn;
        }
        let rep = regret_decomposition_check(&prob, &sol, &steps).unwrap();
        assert!(rep.max_abs_residual <= 1e-10, "{rep:?}");
        assert!(rep.max_expanded_residual <= 1e-10, "{rep:?}");
    }

    #[test]
    fn p_tilde_switches_to_local_cost() {
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        let (p, local) = p_tilde(&prob, &sol, &sol.k);
        assert!(local);
        assert!((p - &sol.p).abs().max() < 1e-8);
        let (p, local) = p_tilde(&prob, &sol, &Mat::from_element(1, 1, -0.5));
        assert!(!local);
        assert_eq!(p, sol.p);
    }

    #[test]
    fn empty_input_is_an_error() {
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        assert!(regret_decomposition_check(&prob, &sol, &[]).is_err());
    }
}
