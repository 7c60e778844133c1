//! Running Gram sums and the least-squares estimators of `(A, B)`.

use crate::control::LqrProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::scalar::Real;

/// Relative eigenvalue cutoff of the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-12;

/// Which of `(A, B)` is unknown to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    /// Both matrices unknown; regress `x_{s+1}` on `[x_s; u_s]`.
    Both,
    /// `A` known; regress `x_{s+1} − A x_s` on `u_s`.
    AKnown,
    /// `B` known; regress `x_{s+1} − B u_s` on `x_s`.
    BKnown,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Both, Scenario::AKnown, Scenario::BKnown];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Both => "both",
            Scenario::AKnown => "a_known",
            Scenario::BKnown => "b_known",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "both" | "Both" | "I" => Some(Scenario::Both),
            "a_known" | "AKnown" | "II-A" => Some(Scenario::AKnown),
            "b_known" | "BKnown" | "II-B" => Some(Scenario::BKnown),
            _ => None,
        }
    }

    /// Number of most recent transitions withheld from the estimator.
    pub fn lag(self) -> usize {
        match self {
            Scenario::Both | Scenario::AKnown => 1,
            Scenario::BKnown => 0,
        }
    }

    pub fn covariate_dim(self, dx: usize, du: usize) -> usize {
        match self {
            Scenario::Both => dx + du,
            Scenario::AKnown => du,
            Scenario::BKnown => dx,
        }
    }
}

/// Gram sums for one episode.
///
/// The estimator sums (`est_zz`, `est_yz`) lag one transition behind in
/// scenarios `Both` and `AKnown`, so an estimate formed at time `t` uses
/// `s ≤ t−2` there and `s ≤ t−1` for `BKnown`. The gate sum `gate_zz` is
/// never lagged.
#[derive(Debug, Clone)]
pub struct GramAccumulator<T: Real> {
    scenario: Scenario,
    dx: usize,
    du: usize,
    known: Mat<T>,
    est_zz: Mat<T>,
    est_yz: Mat<T>,
    gate_zz: Mat<T>,
    count: usize,
    transitions: usize,
    pending: Option<(Vector<T>, Vector<T>)>,
}

impl<T: Real> GramAccumulator<T> {
    /// The known matrix (if any) is taken from `problem`.
    pub fn new(scenario: Scenario, problem: &LqrProblem<T>) -> Self {
        let (dx, du) = (problem.dx(), problem.du());
        let known = match scenario {
            Scenario::Both => Mat::zeros(0, 0),
            Scenario::AKnown => problem.a().clone(),
            Scenario::BKnown => problem.b().clone(),
        };
        let dz = scenario.covariate_dim(dx, du);
        Self {
            scenario,
            dx,
            du,
            known,
            est_zz: Mat::zeros(dz, dz),
            est_yz: Mat::zeros(dx, dz),
            gate_zz: Mat::zeros(dz, dz),
            count: 0,
            transitions: 0,
            pending: None,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    /// Pairs currently in the estimator sums.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Transitions seen so far, including any withheld one.
    pub fn transitions(&self) -> usize {
        self.transitions
    }

    pub fn est_zz(&self) -> &Mat<T> {
        &self.est_zz
    }

    pub fn est_yz(&self) -> &Mat<T> {
        &self.est_yz
    }

    pub fn gate_zz(&self) -> &Mat<T> {
        &self.gate_zz
    }

    /// Covariate and regression target of one transition.
    pub fn pair(&self, x: &Vector<T>, u: &Vector<T>, x_next: &Vector<T>) -> (Vector<T>, Vector<T>) {
        match self.scenario {
            Scenario::Both => {
                let mut z = Vector::zeros(self.dx + self.du);
                z.rows_mut(0, self.dx).copy_from(x);
                z.rows_mut(self.dx, self.du).copy_from(u);
                (z, x_next.clone())
            }
            Scenario::AKnown => {
                let mut y = x_next.clone();
                y.gemv(-T::one(), &self.known, x, T::one());
                (u.clone(), y)
            }
            Scenario::BKnown => {
                let mut y = x_next.clone();
                y.gemv(-T::one(), &self.known, u, T::one());
                (x.clone(), y)
            }
        }
    }

    pub fn accumulate(&mut self, x: &Vector<T>, u: &Vector<T>, x_next: &Vector<T>) {
        let (z, y) = self.pair(x, u, x_next);
        self.gate_zz.ger(T::one(), &z, &z, T::one());
        self.transitions += 1;
        if self.scenario.lag() == 0 {
            self.add_to_estimator(&z, &y);
        } else if let Some((pz, py)) = self.pending.replace((z, y)) {
            self.add_to_estimator(&pz, &py);
        }
    }

    fn add_to_estimator(&mut self, z: &Vector<T>, y: &Vector<T>) {
        self.est_zz.ger(T::one(), z, z, T::one());
        self.est_yz.ger(T::one(), y, z, T::one());
        self.count += 1;
    }

    /// `[Â B̂] = S_yz S_zz†` restricted to the unknown block.
    pub fn estimate(&self, formed_at: usize) -> Result<Estimate<T>> {
        if self.count == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let (pinv, rank) = linalg::pinv_symmetric(&self.est_zz, T::lit(PINV_CUTOFF));
        let theta = &self.est_yz * pinv;
        let (a_hat, b_hat) = match self.scenario {
            Scenario::Both => (
                theta.columns(0, self.dx).into_owned(),
                theta.columns(self.dx, self.du).into_owned(),
            ),
            Scenario::AKnown => (self.known.clone(), theta),
            Scenario::BKnown => (theta, self.known.clone()),
        };
        Ok(Estimate {
            a_hat,
            b_hat,
            formed_at,
            pinv_rank: rank,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Estimate<T: Real> {
    pub a_hat: Mat<T>,
    pub b_hat: Mat<T>,
    pub formed_at: usize,
    pub pinv_rank: usize,
}

/// Smallest eigenvalue of the gate sum `Σ_{s≤t−1} z_s z_sᵀ`; 0 when empty.
pub fn min_eig_covariates<T: Real>(acc: &GramAccumulator<T>) -> T {
    if acc.transitions == 0 {
        return T::zero();
    }
    linalg::min_eigenvalue(&acc.gate_zz)
}

/// Operator-norm errors `(‖Â − A‖, ‖B̂ − B‖)`.
pub fn estimation_error<T: Real>(est: &Estimate<T>, truth: &LqrProblem<T>) -> (T, T) {
    (
        linalg::op_norm(&(&est.a_hat - truth.a())),
        linalg::op_norm(&(&est.b_hat - truth.b())),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar(a: f64, b: f64) -> LqrProblem<f64> {
        LqrProblem::new(
            Mat::from_element(1, 1, a),
            Mat::from_element(1, 1, b),
            Mat::from_element(1, 1, 2.0),
            Mat::identity(1, 1),
            Mat::from_element(1, 1, -(a - 0.5) / b),
        )
        .unwrap()
    }

    fn v(x: f64) -> Vector<f64> {
        Vector::from_element(1, x)
    }

    #[test]
    fn one_transition_is_withheld_when_lagged() {
        let p = scalar(0.9, 1.3);
        let mut acc = GramAccumulator::new(Scenario::Both, &p);
        acc.accumulate(&v(0.0), &v(1.0), &v(1.3));
        assert_eq!(acc.count(), 0);
        assert_eq!(acc.transitions(), 1);
        assert_eq!(acc.estimate(1).unwrap_err(), Error::EmptyAccumulator);
        assert_eq!(min_eig_covariates(&acc), 0.0);
    }

    #[test]
    fn b_known_first_transition_contributes_zero() {
        let p = scalar(0.9, 1.3);
        let mut acc = GramAccumulator::new(Scenario::BKnown, &p);
        acc.accumulate(&v(0.0), &v(0.7), &v(1.3 * 0.7 + 0.2));
        assert_eq!(acc.count(), 1);
        assert_eq!(acc.est_zz()[(0, 0)], 0.0);
        assert_eq!(acc.est_yz()[(0, 0)], 0.0);
    }

    #[test]
    fn three_scalar_transitions_match_hand_sums() {
        let p = scalar(0.9, 1.3);
        let data = [(0.0, 1.0, 0.5), (0.5, -0.4, 0.1), (0.1, 0.3, 0.8)];
        for scenario in Scenario::ALL {
            let mut acc = GramAccumulator::new(scenario, &p);
            for &(x, u, xn) in &data {
                acc.accumulate(&v(x), &v(u), &v(xn));
            }
            let used = &data[..3 - scenario.lag()];
            match scenario {
                Scenario::Both => {
                    let zz01: f64 = used.iter().map(|d| d.0 * d.1).sum();
                    let yz1: f64 = used.iter().map(|d| d.2 * d.1).sum();
                    assert_abs_diff_eq!(acc.est_zz()[(0, 1)], zz01, epsilon = 1e-12);
                    assert_abs_diff_eq!(acc.est_yz()[(0, 1)], yz1, epsilon = 1e-12);
                }
                Scenario::AKnown => {
                    let zz: f64 = used.iter().map(|d| d.1 * d.1).sum();
                    let yz: f64 = used.iter().map(|d| (d.2 - 0.9 * d.0) * d.1).sum();
                    assert_abs_diff_eq!(acc.est_zz()[(0, 0)], zz, epsilon = 1e-12);
                    assert_abs_diff_eq!(acc.est_yz()[(0, 0)], yz, epsilon = 1e-12);
                }
                Scenario::BKnown => {
                    let zz: f64 = used.iter().map(|d| d.0 * d.0).sum();
                    let yz: f64 = used.iter().map(|d| (d.2 - 1.3 * d.1) * d.0).sum();
                    assert_abs_diff_eq!(acc.est_zz()[(0, 0)], zz, epsilon = 1e-12);
                    assert_abs_diff_eq!(acc.est_yz()[(0, 0)], yz, epsilon = 1e-12);
                }
            }
            assert_eq!(acc.count(), used.len());
        }
    }

    #[test]
    fn noiseless_scalar_recovery() {
        let (a, b) = (0.9, 1.3);
        let p = scalar(a, b);
        let mut acc = GramAccumulator::new(Scenario::Both, &p);
        acc.accumulate(&v(0.0), &v(1.0), &v(b));
        acc.accumulate(&v(b), &v(0.0), &v(a * b));
        // third transition is withheld; its content is irrelevant
        acc.accumulate(&v(a * b), &v(5.0), &v(123.0));
        let est = acc.estimate(3).unwrap();
        assert_abs_diff_eq!(est.a_hat[(0, 0)], a, epsilon = 1e-12);
        assert_abs_diff_eq!(est.b_hat[(0, 0)], b, epsilon = 1e-12);
        assert_eq!(est.pinv_rank, 2);
    }

    #[test]
    fn rank_deficient_inputs_give_minimal_norm_b() {
        let p = scalar(0.9, 1.3);
        let mut acc = GramAccumulator::new(Scenario::AKnown, &p);
        for k in 0..5 {
            acc.accumulate(&v(k as f64), &v(0.0), &v(0.9 * k as f64 + 0.1));
        }
        let est = acc.estimate(5).unwrap();
        assert_eq!(est.b_hat[(0, 0)], 0.0);
        assert_eq!(est.a_hat, *p.a());
        assert_eq!(est.pinv_rank, 0);
    }

    #[test]
    fn known_matrix_is_copied_exactly() {
        let p = scalar(0.9, 1.3);
        let mut acc = GramAccumulator::new(Scenario::BKnown, &p);
        acc.accumulate(&v(0.3), &v(0.2), &v(0.5));
        let est = acc.estimate(1).unwrap();
        assert_eq!(est.b_hat, *p.b());
    }

    #[test]
    fn estimation_error_examples() {
        let p = scalar(0.9, 1.3);
        let exact = Estimate {
            a_hat: p.a().clone(),
            b_hat: p.b().clone(),
            formed_at: 0,
            pinv_rank: 2,
        };
        assert_eq!(estimation_error(&exact, &p), (0.0, 0.0));
        let two = LqrProblem::new(
            Mat::identity(2, 2) * 0.5,
            Mat::identity(2, 2),
            Mat::identity(2, 2) * 2.0,
            Mat::identity(2, 2),
            Mat::zeros(2, 2),
        )
        .unwrap();
        let mut a_hat = two.a().clone();
        a_hat[(0, 0)] += 0.1;
        let est = Estimate {
            a_hat,
            b_hat: two.b().clone(),
            formed_at: 0,
            pinv_rank: 4,
        };
        let (ea, eb) = estimation_error(&est, &two);
        assert_abs_diff_eq!(ea, 0.1, epsilon = 1e-14);
        assert_eq!(eb, 0.0);
    }
}
