use crate::control::{LqrProblem, RiccatiSolution};
use crate::harness::episode::EpisodeTrace;
use crate::linalg::Mat;

/// `J⋆ = tr(P⋆)`, the optimal average cost under identity noise covariance.
pub fn optimal_cost_rate(riccati: &RiccatiSolution<f64>) -> f64 {
    riccati.p.trace()
}

/// Geometric grid `⌈10^{start + step·k}⌉` up to `horizon`, deduplicated.
pub fn checkpoint_grid(start: f64, step: f64, horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut k = 0usize;
    loop {
        let raw = 10f64.powf(start + step * k as f64);
        // exact powers of ten must not be pushed up by rounding error
        let v = if (raw - raw.round()).abs() <= 1e-9 * raw {
            raw.round() as usize
        } else {
            raw.ceil() as usize
        };
        if v > horizon {
            break;
        }
        if out.last() != Some(&v) {
            out.push(v);
        }
        k += 1;
    }
    out
}

/// Default regret checkpoints `⌈10^{3+0.1k}⌉ ≤ horizon`.
pub fn default_checkpoints(horizon: usize) -> Vec<usize> {
    checkpoint_grid(3.0, 0.1, horizon)
}

/// `R_T′ = Σ_{t=1}^{T′} cost_t − T′·tr(P⋆)` for `T′ = 0..=T` (entry 0 is 0).
pub fn empirical_regret(trace: &EpisodeTrace, riccati: &RiccatiSolution<f64>) -> Vec<f64> {
    regret_curve(trace.records.iter().map(|r| r.cost), optimal_cost_rate(riccati))
}

fn regret_curve(costs: impl Iterator<Item = f64>, j_star: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut cum = 0.0;
    for (t, c) in costs.enumerate().skip(1) {
        cum += c;
        out.push(cum - t as f64 * j_star);
    }
    out
}

/// `E Σ_{t=1}^{T′} cost_t` of the optimal feedback started at `x_0 = 0`
/// under noise covariance `noise_var·I`, for `T′ = 0..=horizon`.
///
/// Uses `Σ_{t+1} = M Σ_t Mᵀ + noise_var·I` and `E cost_t = tr(WΣ_t)` with
/// `M = A + BK⋆`, `W = Q + K⋆ᵀRK⋆`.
pub fn expected_oracle_cost(problem: &LqrProblem<f64>, riccati: &RiccatiSolution<f64>, noise_var: f64, horizon: usize) -> Vec<f64> {
    let dx = problem.dx();
    let m = problem.closed_loop(&riccati.k);
    let w = problem.q() + riccati.k.transpose() * problem.r() * &riccati.k;
    let noise = Mat::identity(dx, dx) * noise_var;
    let mut sigma = Mat::zeros(dx, dx);
    let mut out = Vec::with_capacity(horizon + 1);
    out.push(0.0);
    let mut cum = 0.0;
    for _ in 1..=horizon {
        sigma = &m * &sigma * m.transpose() + &noise;
        cum += w.dot(&sigma);
        out.push(cum);
    }
    out
}

/// Variance-reduced regret: the cost gap to the optimal feedback driven by
/// the same noise, plus the exact expected regret of that feedback.
/// Unbiased for the same target as [`empirical_regret`].
pub fn coupled_regret(trace: &EpisodeTrace, riccati: &RiccatiSolution<f64>, expected_oracle: &[f64]) -> Vec<f64> {
    let j_star = optimal_cost_rate(riccati);
    let mut out = vec![0.0];
    let mut gap = 0.0;
    for (t, r) in trace.records.iter().enumerate().skip(1) {
        gap += r.cost - r.oracle_cost;
        out.push(gap + expected_oracle[t] - t as f64 * j_star);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cec::Branch;
    use crate::control::riccati_for;
    use crate::estimator::Scenario;
    use crate::harness::episode::{EpisodeSeed, StepRecord};
    use crate::presets;

    fn trace_with_costs(costs: &[f64], oracle: &[f64]) -> EpisodeTrace {
        EpisodeTrace {
            scenario: Scenario::BKnown,
            seed: EpisodeSeed { master: 0, episode: 0 },
            records: costs
                .iter()
                .zip(oracle)
                .enumerate()
                .map(|(t, (&c, &o))| StepRecord {
                    t,
                    x_norm_sq: 0.0,
                    cost: c,
                    branch: Branch::CertaintyEquivalence,
                    ell: true,
                    lambda_min_gate: 0.0,
                    err_a: None,
                    err_b: None,
                    oracle_cost: o,
                })
                .collect(),
            updates: vec![],
            details: None,
            dare_failures: 0,
            aborted: false,
            abort_step: None,
        }
    }

    #[test]
    fn zero_cost_gives_minus_t_trace() {
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        let tr = trace_with_costs(&[0.0; 11], &[0.0; 11]);
        let r = empirical_regret(&tr, &sol);
        assert_eq!(r.len(), 11);
        assert_eq!(r[10], -10.0 * sol.p.trace());
    }

    #[test]
    fn hand_computed_steps() {
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        let p = 1.0 + 3f64.sqrt();
        // cost at t = 0 is excluded
        let tr = trace_with_costs(&[100.0, 5.0, 1.0], &[0.0, 2.0, 3.0]);
        let r = empirical_regret(&tr, &sol);
        assert!((r[1] - (5.0 - p)).abs() < 1e-9);
        assert!((r[2] - (6.0 - 2.0 * p)).abs() < 1e-9);
    }

    #[test]
    fn expected_oracle_cost_scalar() {
        // M = a + b k⋆, W = q + r k⋆²; E x_t² = Σ_{j<t} M^{2j}.
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        let k = sol.k[(0, 0)];
        let m = 1.0 + k;
        let w = 2.0 + k * k;
        let e = expected_oracle_cost(&prob, &sol, 1.0, 50);
        let mut cum = 0.0;
        for t in 1..=50 {
            let var: f64 = (0..t).map(|j| m.powi(2 * j as i32)).sum();
            cum += w * var;
            assert!((e[t] - cum).abs() <= 1e-9 * cum);
        }
        // stationary rate is tr(P⋆)
        let long = expected_oracle_cost(&prob, &sol, 1.0, 2000);
        assert!(((long[2000] - long[1000]) / 1000.0 - sol.p.trace()).abs() < 1e-6);
    }

    #[test]
    fn coupled_matches_raw_when_oracle_is_deterministic() {
        let prob = presets::scalar_easy();
        let sol = riccati_for(&prob).unwrap();
        let costs = [0.0, 4.0, 3.0, 5.0];
        let oracle = [0.0, 1.0, 2.0, 2.5];
        let tr = trace_with_costs(&costs, &oracle);
        let expected = [0.0, 1.0, 3.0, 5.5];
        let raw = empirical_regret(&tr, &sol);
        let cpl = coupled_regret(&tr, &sol, &expected);
        for t in 0..4 {
            assert!((raw[t] - cpl[t]).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_is_log_spaced() {
        let g = default_checkpoints(100_000);
        assert_eq!(g.first(), Some(&1000));
        assert_eq!(g.last(), Some(&100_000));
        assert_eq!(g.len(), 21);
        assert_eq!(g[1], 1259);
    }
}
