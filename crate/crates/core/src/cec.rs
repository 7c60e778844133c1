//! The certainty-equivalence policy with lazy updates and hysteresis
//! switching between the learned gain and the stabilizer.

use rand_distr::{Distribution, StandardNormal};

use crate::control::{self, LqrProblem};
use crate::error::{Error, Result};
use crate::estimator::{self, Estimate, GramAccumulator, Scenario};
use crate::linalg::{self, Mat, Vector};
use crate::scalar::Real;
use crate::system::RngStream;

/// Default hysteresis exponent γ.
pub const DEFAULT_GAMMA: f64 = 0.5;
/// Default consecutive ratio of the geometric schedule.
pub const DEFAULT_SCHEDULE_RATIO: f64 = 2.0;
/// Updates before this time are skipped: the lagged estimator has no data.
pub const FIRST_UPDATE_TIME: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    EveryStep,
    /// `t_{k+1} = ⌊C t_k⌋`, starting from the smallest `t_0` with `C t_0 ≥ t_0 + 1`.
    Geometric { ratio: f64 },
    /// Validated against `t_{k+1} ≤ ratio·t_k`.
    Explicit { times: Vec<usize>, ratio: f64 },
}

/// Update times `𝒯` with a monotone cursor.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    kind: ScheduleKind,
    next: usize,
    index: usize,
}

impl Schedule {
    pub fn every_step() -> Self {
        Self {
            kind: ScheduleKind::EveryStep,
            next: 0,
            index: 0,
        }
    }

    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 1.0) || !ratio.is_finite() {
            return Err(Error::InvalidSchedule {
                reason: format!("geometric ratio must be a finite number > 1, got {ratio}"),
            });
        }
        let first = (1.0 / (ratio - 1.0)).ceil().max(1.0);
        if first > 1e15 {
            return Err(Error::InvalidSchedule {
                reason: format!("geometric ratio {ratio} is too close to 1"),
            });
        }
        Ok(Self {
            kind: ScheduleKind::Geometric { ratio },
            next: first as usize,
            index: 0,
        })
    }

    pub fn explicit(times: Vec<usize>, ratio: f64) -> Result<Self> {
        if !(ratio > 1.0) {
            return Err(Error::InvalidSchedule {
                reason: format!("declared ratio must be > 1, got {ratio}"),
            });
        }
        if times.is_empty() {
            return Err(Error::InvalidSchedule {
                reason: "explicit schedule is empty".into(),
            });
        }
        if times[0] == 0 {
            return Err(Error::InvalidSchedule {
                reason: "update times must be positive".into(),
            });
        }
        for w in times.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::InvalidSchedule {
                    reason: format!("times not strictly increasing at {} -> {}", w[0], w[1]),
                });
            }
            if w[1] as f64 > ratio * w[0] as f64 {
                return Err(Error::InvalidSchedule {
                    reason: format!("{} > {ratio}·{}", w[1], w[0]),
                });
            }
        }
        let next = times[0];
        Ok(Self {
            kind: ScheduleKind::Explicit { times, ratio },
            next,
            index: 0,
        })
    }

    pub fn kind(&self) -> &ScheduleKind {
        &self.kind
    }

    /// Whether `t ∈ 𝒯`. Queries must be nondecreasing in `t`.
    pub fn contains(&mut self, t: usize) -> bool {
        match &self.kind {
            ScheduleKind::EveryStep => true,
            ScheduleKind::Geometric { ratio } => {
                let ratio = *ratio;
                while self.next < t {
                    self.next = (ratio * self.next as f64).floor() as usize;
                }
                if self.next == t {
                    self.next = (ratio * self.next as f64).floor() as usize;
                    true
                } else {
                    false
                }
            }
            ScheduleKind::Explicit { times, .. } => {
                while self.index < times.len() && times[self.index] < t {
                    self.index += 1;
                }
                if self.index < times.len() && times[self.index] == t {
                    self.index += 1;
                    true
                } else {
                    false
                }
            }
        }
    }

    /// All update times `≤ horizon`, from a fresh cursor.
    pub fn times_up_to(&self, horizon: usize) -> Vec<usize> {
        let mut fresh = match &self.kind {
            ScheduleKind::EveryStep => Schedule::every_step(),
            ScheduleKind::Geometric { ratio } => Schedule::geometric(*ratio).expect("validated"),
            ScheduleKind::Explicit { times, ratio } => Schedule::explicit(times.clone(), *ratio).expect("validated"),
        };
        (0..=horizon).filter(|&t| fresh.contains(t)).collect()
    }
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::geometric(DEFAULT_SCHEDULE_RATIO).expect("default ratio is valid")
    }
}

/// Thresholds `f(t) = t^{1+γ/2}`, `g(t) = t^{1+γ}`, `h(t) = t^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisParams {
    pub gamma: f64,
    pub sigma2: f64,
    pub dx: usize,
}

impl HysteresisParams {
    pub fn new(gamma: f64, sigma2: f64, dx: usize) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument {
                reason: format!("gamma must be positive, got {gamma}"),
            });
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidArgument {
                reason: format!("sigma^2 must be nonnegative, got {sigma2}"),
            });
        }
        Ok(Self { gamma, sigma2, dx })
    }

    pub fn f(&self, t: usize) -> f64 {
        (t as f64).powf(1.0 + self.gamma / 2.0)
    }

    pub fn g(&self, t: usize) -> f64 {
        (t as f64).powf(1.0 + self.gamma)
    }

    pub fn h(&self, t: usize) -> f64 {
        (t as f64).powf(self.gamma)
    }
}

/// `ℓ_t`: 0 above `σ²d_x g(t)`, 1 below `σ²d_x f(t)`, unchanged in between.
pub fn hysteresis_update(ell_prev: bool, energy: f64, t: usize, params: &HysteresisParams) -> bool {
    let unit = params.sigma2 * params.dx as f64;
    if energy > unit * params.g(t) {
        false
    } else if energy < unit * params.f(t) {
        true
    } else {
        ell_prev
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    CertaintyEquivalence,
    Stabilizer,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::CertaintyEquivalence => "ce",
            Branch::Stabilizer => "stabilizer",
        }
    }
}

/// Perturbation rule of a scenario.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self { scenario }
    }

    /// Standard deviation of the input perturbation, or `None` when no
    /// perturbation is added. `Both`: `σ_t² = √d_x σ²/√t` (`σ_0² = √d_x σ²`)
    /// on both branches; `AKnown`: unit variance on the stabilizer branch.
    pub fn perturbation_std(&self, t: usize, branch: Branch, dx: usize, sigma2: f64) -> Option<f64> {
        match (self.scenario, branch) {
            (Scenario::Both, _) => {
                let var = (dx as f64).sqrt() * sigma2 / (t.max(1) as f64).sqrt();
                Some(var.sqrt())
            }
            (Scenario::AKnown, Branch::Stabilizer) => Some(1.0),
            _ => None,
        }
    }
}

/// Outcome of one scheduled update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateRecord {
    pub t: usize,
    pub err_a: f64,
    pub err_b: f64,
    pub dare_ok: bool,
}

/// Per-episode controller state.
#[derive(Debug, Clone)]
pub struct CecState<T: Real> {
    pub ell: bool,
    pub k_cur: Mat<T>,
    pub p_cur: Mat<T>,
    /// `‖K_cur‖²`, cached at each update.
    pub k_norm_sq: T,
    pub estimate: Option<Estimate<T>>,
    pub acc: GramAccumulator<T>,
    pub last_branch: Branch,
    pub dare_failures: usize,
    pub dare_tol: T,
    pub dare_max_iter: usize,
}

impl<T: Real> CecState<T> {
    /// `ℓ_{−1} = 0`, `K_{−1} = 0`.
    pub fn new(problem: &LqrProblem<T>, scenario: Scenario) -> Self {
        Self {
            ell: false,
            k_cur: Mat::zeros(problem.du(), problem.dx()),
            p_cur: Mat::zeros(problem.dx(), problem.dx()),
            k_norm_sq: T::zero(),
            estimate: None,
            acc: GramAccumulator::new(scenario, problem),
            last_branch: Branch::Stabilizer,
            dare_failures: 0,
            dare_tol: T::lit(control::DEFAULT_DARE_TOL),
            dare_max_iter: control::DEFAULT_DARE_MAX_ITER,
        }
    }

    pub fn scenario(&self) -> Scenario {
        self.acc.scenario()
    }
}

/// At `t ∈ 𝒯` (and `t ≥ 2`) forms the estimate and solves its DARE. A
/// failed solve keeps the previous gain and bumps `dare_failures`.
pub fn maybe_update_controller<T: Real>(
    state: &mut CecState<T>,
    t: usize,
    schedule: &mut Schedule,
    problem: &LqrProblem<T>,
) -> Option<UpdateRecord> {
    if !schedule.contains(t) || t < FIRST_UPDATE_TIME {
        return None;
    }
    let est = match state.acc.estimate(t) {
        Ok(est) => est,
        Err(_) => return None,
    };
    let (err_a, err_b) = estimator::estimation_error(&est, problem);
    let solved = control::solve_dare_matrices(
        &est.a_hat,
        &est.b_hat,
        problem.q(),
        problem.r(),
        state.dare_tol,
        state.dare_max_iter,
    );
    let dare_ok = match solved {
        Ok(sol) if sol.k.iter().all(|v| v.is_finite()) => {
            let n = linalg::op_norm(&sol.k);
            state.k_norm_sq = n * n;
            state.k_cur = sol.k;
            state.p_cur = sol.p;
            true
        }
        _ => {
            state.dare_failures += 1;
            false
        }
    };
    state.estimate = Some(est);
    Some(UpdateRecord {
        t,
        err_a: err_a.as_f64(),
        err_b: err_b.as_f64(),
        dare_ok,
    })
}

/// Gate conditions of the scenario, with `λ_min` of the un-lagged gate sum.
pub fn gates_pass<T: Real>(state: &CecState<T>, t: usize, params: &HysteresisParams, lambda_min_gate: f64) -> bool {
    if !state.ell || state.k_norm_sq.as_f64() > params.h(t) {
        return false;
    }
    let tf = t as f64;
    match state.scenario() {
        Scenario::BKnown => true,
        Scenario::AKnown => lambda_min_gate >= tf.sqrt(),
        Scenario::Both => lambda_min_gate >= tf.sqrt().sqrt(),
    }
}

/// Control input on the chosen branch plus the added perturbation (zero
/// when the scenario adds none).
pub fn control_input<T: Real>(
    state: &CecState<T>,
    problem: &LqrProblem<T>,
    x: &Vector<T>,
    t: usize,
    gates: bool,
    sigma2: f64,
    rng: &mut RngStream,
) -> (Vector<T>, Vector<T>, Branch) {
    let branch = if gates {
        Branch::CertaintyEquivalence
    } else {
        Branch::Stabilizer
    };
    let gain = match branch {
        Branch::CertaintyEquivalence => &state.k_cur,
        Branch::Stabilizer => problem.k_stab(),
    };
    let mut u = gain * x;
    let du = problem.du();
    let perturbation = match ScenarioConfig::new(state.scenario()).perturbation_std(t, branch, problem.dx(), sigma2) {
        Some(std) => {
            let normal = StandardNormal;
            let v = Vector::from_iterator(
                du,
                (0..du).map(|_| {
                    let z: f64 = normal.sample(rng.rng());
                    T::lit(std * z)
                }),
            );
            u += &v;
            v
        }
        None => Vector::zeros(du),
    };
    (u, perturbation, branch)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(gamma: f64) -> HysteresisParams {
        HysteresisParams::new(gamma, 1.0, 1).unwrap()
    }

    #[test]
    fn hysteresis_examples() {
        let p = params(1.0);
        assert!(hysteresis_update(false, 5.0, 4, &p));
        assert!(!hysteresis_update(true, 20.0, 4, &p));
        assert!(hysteresis_update(true, 10.0, 4, &p));
        assert!(!hysteresis_update(false, 10.0, 4, &p));
    }

    #[test]
    fn first_step_stays_off() {
        assert!(!hysteresis_update(false, 0.0, 0, &params(0.5)));
    }

    #[test]
    fn thresholds_are_ordered() {
        let p = params(0.3);
        for t in 1..1000 {
            assert!(p.g(t) >= p.f(t) && p.f(t) >= t as f64);
        }
    }

    #[test]
    fn geometric_schedule_doubles() {
        let s = Schedule::geometric(2.0).unwrap();
        assert_eq!(s.times_up_to(70), vec![1, 2, 4, 8, 16, 32, 64]);
    }

    #[test]
    fn geometric_schedule_respects_ratio() {
        for &c in &[1.1, 1.5, 2.0, 3.7] {
            let times = Schedule::geometric(c).unwrap().times_up_to(100_000);
            assert!(times.len() > 3);
            for w in times.windows(2) {
                assert!(w[1] > w[0] && w[1] as f64 <= c * w[0] as f64, "{c}: {w:?}");
            }
        }
    }

    #[test]
    fn explicit_schedule_validation() {
        assert!(Schedule::explicit(vec![2, 4, 8], 2.0).is_ok());
        assert!(Schedule::explicit(vec![2, 5], 2.0).is_err());
        assert!(Schedule::explicit(vec![4, 4], 2.0).is_err());
        assert!(Schedule::explicit(vec![0, 1], 2.0).is_err());
        let mut s = Schedule::explicit(vec![3, 5, 9], 2.0).unwrap();
        let hits: Vec<_> = (0..12).filter(|&t| s.contains(t)).collect();
        assert_eq!(hits, vec![3, 5, 9]);
    }

    fn scalar_problem() -> LqrProblem<f64> {
        LqrProblem::new(
            Mat::from_element(1, 1, 1.0),
            Mat::from_element(1, 1, 1.0),
            Mat::from_element(1, 1, 2.0),
            Mat::identity(1, 1),
            Mat::from_element(1, 1, -0.5),
        )
        .unwrap()
    }

    #[test]
    fn gate_examples() {
        let prob = scalar_problem();
        let p = params(0.5);
        let mut st = CecState::new(&prob, Scenario::BKnown);
        st.k_norm_sq = 0.5;
        assert!(!gates_pass(&st, 1, &p, 100.0));
        st.ell = true;
        assert!(gates_pass(&st, 1, &p, 0.0));

        let mut both = CecState::new(&prob, Scenario::Both);
        both.ell = true;
        both.k_norm_sq = 0.5;
        assert!(!gates_pass(&both, 16, &p, 1.0));
        assert!(gates_pass(&both, 16, &p, 2.0));

        let mut ak = CecState::new(&prob, Scenario::AKnown);
        ak.ell = true;
        assert!(!gates_pass(&ak, 16, &p, 3.9));
        assert!(gates_pass(&ak, 16, &p, 4.0));
    }

    #[test]
    fn off_schedule_leaves_state_untouched() {
        let prob = scalar_problem();
        let mut st = CecState::new(&prob, Scenario::Both);
        let mut sched = Schedule::default();
        let x = Vector::from_element(1, 0.0);
        st.acc.accumulate(&x, &Vector::from_element(1, 1.0), &Vector::from_element(1, 1.0));
        st.acc.accumulate(&Vector::from_element(1, 1.0), &x, &Vector::from_element(1, 1.0));
        st.acc.accumulate(&Vector::from_element(1, 1.0), &x, &Vector::from_element(1, 1.0));
        let before = st.k_cur.clone();
        assert!(maybe_update_controller(&mut st, 3, &mut sched, &prob).is_none());
        assert_eq!(st.k_cur, before);
    }

    #[test]
    fn noiseless_update_recovers_optimal_gain() {
        let prob = scalar_problem();
        let mut st = CecState::new(&prob, Scenario::Both);
        let mut sched = Schedule::every_step();
        // (x, u, x') with a = b = 1
        st.acc.accumulate(&Vector::from_element(1, 0.0), &Vector::from_element(1, 1.0), &Vector::from_element(1, 1.0));
        st.acc.accumulate(&Vector::from_element(1, 1.0), &Vector::from_element(1, 0.0), &Vector::from_element(1, 1.0));
        st.acc.accumulate(&Vector::from_element(1, 1.0), &Vector::from_element(1, 0.3), &Vector::from_element(1, 1.3));
        let rec = maybe_update_controller(&mut st, 3, &mut sched, &prob).unwrap();
        assert!(rec.dare_ok);
        let k_opt = -(1.0 + 3f64.sqrt()) / (2.0 + 3f64.sqrt());
        assert!((st.k_cur[(0, 0)] - k_opt).abs() < 1e-6);
    }

    #[test]
    fn failed_dare_keeps_previous_gain() {
        let prob = scalar_problem();
        let mut st = CecState::new(&prob, Scenario::AKnown);
        st.k_cur[(0, 0)] = -0.3;
        let mut sched = Schedule::every_step();
        // all inputs zero: B̂ = 0 with A = 1, which is not stabilizable
        for _ in 0..3 {
            st.acc.accumulate(&Vector::from_element(1, 1.0), &Vector::from_element(1, 0.0), &Vector::from_element(1, 1.0));
        }
        let rec = maybe_update_controller(&mut st, 3, &mut sched, &prob).unwrap();
        assert!(!rec.dare_ok);
        assert_eq!(st.dare_failures, 1);
        assert_eq!(st.k_cur[(0, 0)], -0.3);
    }

    #[test]
    fn b_known_ce_input_is_exact() {
        let prob = scalar_problem();
        let mut st = CecState::new(&prob, Scenario::BKnown);
        st.k_cur[(0, 0)] = -0.7;
        let mut rng = RngStream::new(0, 0);
        let x = Vector::from_element(1, 2.0);
        let (u, pert, branch) = control_input(&st, &prob, &x, 10, true, 1.0, &mut rng);
        assert_eq!(branch, Branch::CertaintyEquivalence);
        assert_eq!(u[0], -1.4);
        assert_eq!(pert[0], 0.0);
    }

    #[test]
    fn a_known_stabilizer_adds_unit_noise() {
        let prob = scalar_problem();
        let st = CecState::new(&prob, Scenario::AKnown);
        let mut rng = RngStream::new(0, 0);
        let x = Vector::from_element(1, 2.0);
        let (u, pert, branch) = control_input(&st, &prob, &x, 10, false, 1.0, &mut rng);
        assert_eq!(branch, Branch::Stabilizer);
        assert_eq!(u[0], -1.0 + pert[0]);
        assert_ne!(pert[0], 0.0);
        let (_, pert_ce, _) = control_input(&st, &prob, &x, 10, true, 1.0, &mut rng);
        assert_eq!(pert_ce[0], 0.0);
    }

    #[test]
    fn both_perturbation_variance() {
        let prob = LqrProblem::new(
            Mat::identity(2, 2) * 0.5,
            Mat::identity(2, 2),
            Mat::identity(2, 2) * 2.0,
            Mat::identity(2, 2),
            Mat::zeros(2, 2),
        )
        .unwrap();
        let st = CecState::new(&prob, Scenario::Both);
        let mut rng = RngStream::new(5, 1);
        let x = Vector::zeros(2);
        let t = 16;
        let n = 100_000;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let (u, pert, _) = control_input(&st, &prob, &x, t, true, 1.0, &mut rng);
            assert_eq!(u, pert);
            sum_sq += u.norm_squared();
        }
        let var = sum_sq / (2 * n) as f64;
        let target = 2f64.sqrt() / 4.0;
        assert!((var - target).abs() / target < 0.02, "{var} vs {target}");
    }

    #[test]
    fn sigma_zero_uses_continuous_extension() {
        let cfg = ScenarioConfig::new(Scenario::Both);
        let s0 = cfg.perturbation_std(0, Branch::Stabilizer, 4, 1.0).unwrap();
        let s1 = cfg.perturbation_std(1, Branch::Stabilizer, 4, 1.0).unwrap();
        assert_eq!(s0, s1);
        assert!((s0 * s0 - 2.0).abs() < 1e-15);
        assert!(ScenarioConfig::new(Scenario::BKnown)
            .perturbation_std(5, Branch::Stabilizer, 1, 1.0)
            .is_none());
    }
}
