use crate::cec::HysteresisParams;
use crate::control::{toeplitz_gain, LqrProblem, DEFAULT_ENVELOPE_TOL};
use crate::error::Result;
use crate::harness::episode::EpisodeTrace;
use crate::linalg;

/// Multiplier in `C_emp = 10⁶·𝒢_∘²·C_∘²`.
pub const GROWTH_MULTIPLIER: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub c_emp: f64,
    /// Fraction of steps with `Σ_{s≤t}‖x_s‖² ≤ C_emp σ² d_x g(t) h(t)`.
    pub fraction_within: f64,
    pub violations: usize,
    /// Largest `energy / (σ² d_x g(t) h(t))` over `t ≥ 1`.
    pub max_ratio: f64,
}

impl GrowthReport {
    pub fn flagged(&self) -> bool {
        self.violations > 0
    }
}

/// `C_∘ = max(‖A‖, ‖B‖, ‖BK_∘‖, ‖K_∘‖, 1)` and `𝒢_∘ = 𝒢_{A+BK_∘}`.
pub fn stabilizer_constants(problem: &LqrProblem<f64>) -> Result<(f64, f64)> {
    let k = problem.k_stab();
    let c = [
        linalg::op_norm(problem.a()),
        linalg::op_norm(problem.b()),
        linalg::op_norm(&(problem.b() * k)),
        linalg::op_norm(k),
        1.0,
    ]
    .into_iter()
    .fold(f64::MIN, f64::max);
    let g = toeplitz_gain(&problem.closed_loop(k), DEFAULT_ENVELOPE_TOL)?.gain_g;
    Ok((c, g))
}

/// Soft check of the state-energy growth bound `g(t)h(t)`.
pub fn growth_check(trace: &EpisodeTrace, problem: &LqrProblem<f64>, params: &HysteresisParams) -> Result<GrowthReport> {
    let (c, g) = stabilizer_constants(problem)?;
    let c_emp = GROWTH_MULTIPLIER * g * g * c * c;
    let unit = params.sigma2 * params.dx as f64;
    let energy = trace.energy();
    let mut within = 0;
    let mut max_ratio: f64 = 0.0;
    for (rec, e) in trace.records.iter().zip(&energy) {
        let scale = unit * params.g(rec.t) * params.h(rec.t);
        if *e <= c_emp * scale {
            within += 1;
        }
        if rec.t >= 1 && scale > 0.0 {
            max_ratio = max_ratio.max(e / scale);
        }
    }
    let n = energy.len();
    Ok(GrowthReport {
        c_emp,
        fraction_within: within as f64 / n.max(1) as f64,
        violations: n - within,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Scenario;
    use crate::harness::episode::{run_episode, EpisodeConfig, EpisodeSeed};
    use crate::presets;

    #[test]
    fn scalar_constants() {
        let (c, g) = stabilizer_constants(&presets::scalar_easy()).unwrap();
        assert_eq!(c, 1.0);
        assert!((g - 2.0).abs() < 1e-9);
    }

    #[test]
    fn noiseless_run_is_within() {
        let mut cfg = EpisodeConfig::new(presets::scalar_easy(), Scenario::Both, 300).unwrap();
        cfg.noise.sigma = 0.0;
        let tr = run_episode(&cfg, EpisodeSeed { master: 0, episode: 0 }).unwrap();
        let rep = growth_check(&tr, &cfg.problem, &cfg.hysteresis().unwrap()).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.fraction_within, 1.0);
    }

    #[test]
    fn noisy_run_is_within() {
        let cfg = EpisodeConfig::new(presets::dim2_default(), Scenario::Both, 5000).unwrap();
        let tr = run_episode(&cfg, EpisodeSeed { master: 3, episode: 0 }).unwrap();
        let rep = growth_check(&tr, &cfg.problem, &cfg.hysteresis().unwrap()).unwrap();
        assert!(!rep.flagged(), "{rep:?}");
    }
}
