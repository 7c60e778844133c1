use crate::cec::{self, Branch, CecState, HysteresisParams, Schedule, UpdateRecord};
use crate::control::{self, LqrProblem, RiccatiSolution};
use crate::error::{Error, Result};
use crate::estimator::{self, Scenario};
use crate::linalg::{self, Mat, Vector};
use crate::system::{self, NoiseModel, RngStream, SimState, StreamRole};

/// Everything needed to run one episode, shared by all seeds.
#[derive(Debug, Clone)]
pub struct EpisodeConfig {
    pub problem: LqrProblem<f64>,
    /// Solution of the true DARE; drives the oracle shadow.
    pub riccati: RiccatiSolution<f64>,
    pub scenario: Scenario,
    pub schedule: Schedule,
    pub gamma: f64,
    pub noise: NoiseModel,
    pub horizon: usize,
    /// Keep vectors and gains of every step (needed by the decomposition check).
    pub record_details: bool,
}

impl EpisodeConfig {
    /// Default schedule, `γ` and standard Gaussian noise.
    pub fn new(problem: LqrProblem<f64>, scenario: Scenario, horizon: usize) -> Result<Self> {
        let riccati = control::riccati_for(&problem)?;
        Ok(Self {
            problem,
            riccati,
            scenario,
            schedule: Schedule::default(),
            gamma: cec::DEFAULT_GAMMA,
            noise: NoiseModel::default(),
            horizon,
            record_details: false,
        })
    }

    pub fn hysteresis(&self) -> Result<HysteresisParams> {
        HysteresisParams::new(self.gamma, self.noise.sigma2(), self.problem.dx())
    }
}

/// Identifies the random streams of one episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpisodeSeed {
    pub master: u64,
    pub episode: u64,
}

/// One row of the trace. `cost` is `x_tᵀQx_t + u_tᵀRu_t` with `u_t` the
/// input applied at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub x_norm_sq: f64,
    pub cost: f64,
    pub branch: Branch,
    pub ell: bool,
    pub lambda_min_gate: f64,
    /// Estimation errors, present at update times only.
    pub err_a: Option<f64>,
    pub err_b: Option<f64>,
    /// Cost of the optimal feedback driven by the same noise.
    pub oracle_cost: f64,
}

/// Realized quantities of one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDetail {
    pub x: Vector<f64>,
    pub u: Vector<f64>,
    pub x_next: Vector<f64>,
    pub eta: Vector<f64>,
    /// Added input perturbation `α_t ξ_t` (zero when none).
    pub perturbation: Vector<f64>,
    /// Gain `K̃_t` of the branch taken.
    pub gain: Mat<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub scenario: Scenario,
    pub seed: EpisodeSeed,
    pub records: Vec<StepRecord>,
    pub updates: Vec<UpdateRecord>,
    pub details: Option<Vec<StepDetail>>,
    pub dare_failures: usize,
    pub aborted: bool,
    pub abort_step: Option<usize>,
}

impl EpisodeTrace {
    /// Last stabilizer step at or after `warmup`; `None` if there is none.
    pub fn commitment_time(&self, warmup: usize) -> Option<usize> {
        self.records
            .iter()
            .rev()
            .take_while(|r| r.t >= warmup)
            .find(|r| r.branch == Branch::Stabilizer)
            .map(|r| r.t)
    }

    /// `Σ_{s≤t} ‖x_s‖²` for every recorded `t`.
    pub fn energy(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.records
            .iter()
            .map(|r| {
                acc += r.x_norm_sq;
                acc
            })
            .collect()
    }
}

/// Runs steps `t = 0..=T`: hysteresis, scheduled update, gates, input,
/// system step. A non-finite state ends the episode early with
/// `aborted = true`.
pub fn run_episode(cfg: &EpisodeConfig, seed: EpisodeSeed) -> Result<EpisodeTrace> {
    if cfg.horizon < 1 {
        return Err(Error::InvalidArgument {
            reason: "horizon must be at least 1".into(),
        });
    }
    let problem = &cfg.problem;
    let params = cfg.hysteresis()?;
    let sigma2 = cfg.noise.sigma2();
    let dx = problem.dx();
    let mut schedule = cfg.schedule.clone();
    let mut noise_rng = RngStream::for_episode(seed.master, seed.episode, StreamRole::ProcessNoise);
    let mut input_rng = RngStream::for_episode(seed.master, seed.episode, StreamRole::InputPerturbation);

    let mut state = CecState::new(problem, cfg.scenario);
    let mut sim = SimState::<f64>::new(dx);
    let mut oracle_x = Vector::<f64>::zeros(dx);
    let k_opt = &cfg.riccati.k;
    let oracle_closed = problem.closed_loop(k_opt);
    let oracle_weight = problem.q() + k_opt.transpose() * problem.r() * k_opt;

    let mut records = Vec::with_capacity(cfg.horizon + 1);
    let mut updates = Vec::new();
    let mut details = cfg.record_details.then(Vec::new);
    let mut aborted = false;
    let mut abort_step = None;

    for t in 0..=cfg.horizon {
        state.ell = cec::hysteresis_update(state.ell, sim.cumulative_state_energy, t, &params);
        let update = cec::maybe_update_controller(&mut state, t, &mut schedule, problem);
        let lambda_min = estimator::min_eig_covariates(&state.acc);
        let gates = cec::gates_pass(&state, t, &params, lambda_min);
        let (u, perturbation, branch) = cec::control_input(&state, problem, &sim.x, t, gates, sigma2, &mut input_rng);
        state.last_branch = branch;

        let x_norm_sq = sim.x.norm_squared();
        let cost = system::instantaneous_cost(&sim.x, &u, problem.q(), problem.r());
        let oracle_cost = linalg::quad_form(&oracle_weight, &oracle_x);
        let eta: Vector<f64> = cfg.noise.sample(&mut noise_rng, dx);

        records.push(StepRecord {
            t,
            x_norm_sq,
            cost,
            branch,
            ell: state.ell,
            lambda_min_gate: lambda_min,
            err_a: update.as_ref().map(|r| r.err_a),
            err_b: update.as_ref().map(|r| r.err_b),
            oracle_cost,
        });
        if let Some(rec) = update {
            updates.push(rec);
        }

        let x_prev = sim.x.clone();
        if !cost.is_finite() {
            aborted = true;
            abort_step = Some(t);
            break;
        }
        if system::step_in_place(&mut sim, &u, &eta, problem).is_err() {
            aborted = true;
            abort_step = Some(t);
            break;
        }
        oracle_x = &oracle_closed * &oracle_x + &eta;
        state.acc.accumulate(&x_prev, &u, &sim.x);

        if let Some(d) = details.as_mut() {
            let gain = match branch {
                Branch::CertaintyEquivalence => state.k_cur.clone(),
                Branch::Stabilizer => problem.k_stab().clone(),
            };
            d.push(StepDetail {
                x: x_prev,
                u,
                x_next: sim.x.clone(),
                eta,
                perturbation,
                gain,
            });
        }
    }

    Ok(EpisodeTrace {
        scenario: cfg.scenario,
        seed,
        records,
        updates,
        details,
        dare_failures: state.dare_failures,
        aborted,
        abort_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    fn scalar_cfg(scenario: Scenario, horizon: usize) -> EpisodeConfig {
        EpisodeConfig::new(presets::scalar_easy(), scenario, horizon).unwrap()
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = scalar_cfg(Scenario::Both, 500);
        let seed = EpisodeSeed { master: 9, episode: 3 };
        let a = run_episode(&cfg, seed).unwrap();
        let b = run_episode(&cfg, seed).unwrap();
        assert_eq!(a, b);
        let c = run_episode(&cfg, EpisodeSeed { master: 9, episode: 4 }).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn trace_has_horizon_plus_one_rows() {
        let cfg = scalar_cfg(Scenario::BKnown, 50);
        let tr = run_episode(&cfg, EpisodeSeed { master: 1, episode: 0 }).unwrap();
        assert_eq!(tr.records.len(), 51);
        assert!(!tr.aborted);
        assert!(tr.records.iter().all(|r| r.cost >= 0.0));
        // bootstrap always uses the stabilizer
        assert_eq!(tr.records[0].branch, Branch::Stabilizer);
        assert!(!tr.records[0].ell);
    }

    #[test]
    fn noiseless_run_stays_at_rest() {
        let mut cfg = scalar_cfg(Scenario::BKnown, 200);
        cfg.noise.sigma = 0.0;
        let tr = run_episode(&cfg, EpisodeSeed { master: 1, episode: 0 }).unwrap();
        assert!(!tr.aborted);
        assert!(tr.records.iter().all(|r| r.cost == 0.0 && r.oracle_cost == 0.0));
    }

    #[test]
    fn update_rows_carry_errors() {
        let cfg = scalar_cfg(Scenario::Both, 300);
        let tr = run_episode(&cfg, EpisodeSeed { master: 2, episode: 0 }).unwrap();
        let with_err: Vec<_> = tr.records.iter().filter(|r| r.err_a.is_some()).map(|r| r.t).collect();
        assert_eq!(with_err, vec![2, 4, 8, 16, 32, 64, 128, 256]);
        assert_eq!(tr.updates.len(), with_err.len());
    }

    #[test]
    fn energy_matches_recomputation() {
        let cfg = scalar_cfg(Scenario::AKnown, 400);
        let tr = run_episode(&cfg, EpisodeSeed { master: 5, episode: 1 }).unwrap();
        let energy = tr.energy();
        let direct: f64 = tr.records.iter().map(|r| r.x_norm_sq).sum();
        let last = *energy.last().unwrap();
        assert!((last - direct).abs() <= 1e-9 * direct.max(1.0));
    }
}
