use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::harness::episode::{run_episode, EpisodeConfig, EpisodeSeed, EpisodeTrace};
use crate::harness::fit::{fit_rate, RateFit};
use crate::harness::regret::{self, coupled_regret, empirical_regret, expected_oracle_cost};

/// Steps before this are ignored by the commitment statistic.
pub const DEFAULT_COMMIT_WARMUP: usize = 100;

#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub episode: EpisodeConfig,
    pub n_seeds: usize,
    pub master_seed: u64,
    /// Regret checkpoints, strictly increasing and `≤ horizon`.
    pub checkpoints: Vec<usize>,
    /// Times at which the gate `λ_min` is sampled.
    pub lambda_grid: Vec<usize>,
    pub commit_warmup: usize,
}

impl MonteCarloConfig {
    pub fn new(episode: EpisodeConfig, n_seeds: usize, master_seed: u64) -> Self {
        let horizon = episode.horizon;
        Self {
            episode,
            n_seeds,
            master_seed,
            checkpoints: regret::default_checkpoints(horizon),
            lambda_grid: regret::checkpoint_grid(1.0, 0.1, horizon),
            commit_warmup: DEFAULT_COMMIT_WARMUP,
        }
    }
}

/// What is kept of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedSummary {
    pub seed_index: usize,
    /// Variance-reduced regret at each checkpoint.
    pub regret: Vec<f64>,
    /// Plain cumulative-cost regret at each checkpoint.
    pub raw_regret: Vec<f64>,
    /// Last stabilizer step after the warmup, if any.
    pub commitment: Option<usize>,
    pub dare_failures: usize,
    pub abort_step: Option<usize>,
    /// `(t, errA, errB)` at every update time.
    pub updates: Vec<(usize, f64, f64)>,
    /// Gate `λ_min` on the configured grid.
    pub lambda_min: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub checkpoints: Vec<usize>,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
    pub n_positive: Vec<usize>,
    pub raw_mean: Vec<f64>,
    /// Power-law fit of the positive part of `mean`.
    pub fit: Option<RateFit>,
    pub per_seed: Vec<SeedSummary>,
    pub lambda_grid: Vec<usize>,
    pub mean_lambda_min: Vec<f64>,
    /// Update times common to all seeds and the mean of `max(errA², errB²)`.
    pub update_times: Vec<usize>,
    pub mean_err_sq: Vec<f64>,
    pub dare_failures: usize,
    pub aborted: usize,
}

impl RegretReport {
    /// `-1` encodes "no stabilizer step after the warmup".
    pub fn commitment_times(&self) -> Vec<i64> {
        self.per_seed
            .iter()
            .map(|s| s.commitment.map_or(-1, |c| c as i64))
            .collect()
    }

    /// Fraction of seeds with no stabilizer step after `t`.
    pub fn committed_fraction(&self, t: usize) -> f64 {
        let n = self.per_seed.len().max(1);
        let ok = self
            .per_seed
            .iter()
            .filter(|s| s.abort_step.is_none() && s.commitment.is_none_or(|c| c <= t))
            .count();
        ok as f64 / n as f64
    }

    /// Fit of the mean squared estimation error over update times `≥ from`.
    pub fn error_fit(&self, from: usize) -> Result<RateFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .update_times
            .iter()
            .zip(&self.mean_err_sq)
            .filter(|(t, _)| **t >= from)
            .map(|(t, e)| (*t as f64, *e))
            .unzip();
        fit_rate(&xs, &ys)
    }

    /// Fit of the mean gate `λ_min` over `from ≤ t ≤ to`.
    pub fn lambda_fit(&self, from: usize, to: usize) -> Result<RateFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .lambda_grid
            .iter()
            .zip(&self.mean_lambda_min)
            .filter(|(t, _)| **t >= from && **t <= to)
            .map(|(t, l)| (*t as f64, *l))
            .unzip();
        fit_rate(&xs, &ys)
    }

    pub fn mean_at(&self, t: usize) -> Option<f64> {
        self.checkpoints.iter().position(|&c| c == t).map(|i| self.mean[i])
    }
}

fn summarize(cfg: &MonteCarloConfig, index: usize, trace: &EpisodeTrace, expected: &[f64]) -> SeedSummary {
    let riccati = &cfg.episode.riccati;
    let pick = |curve: &[f64]| -> Vec<f64> {
        cfg.checkpoints
            .iter()
            .map(|&c| curve.get(c).copied().unwrap_or(f64::NAN))
            .collect()
    };
    let regret = pick(&coupled_regret(trace, riccati, expected));
    let raw_regret = pick(&empirical_regret(trace, riccati));
    let lambda_min = cfg
        .lambda_grid
        .iter()
        .map(|&t| trace.records.get(t).map_or(f64::NAN, |r| r.lambda_min_gate))
        .collect();
    SeedSummary {
        seed_index: index,
        regret,
        raw_regret,
        commitment: trace.commitment_time(cfg.commit_warmup),
        dare_failures: trace.dare_failures,
        abort_step: trace.abort_step,
        updates: trace.updates.iter().map(|u| (u.t, u.err_a, u.err_b)).collect(),
        lambda_min,
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Runs `n_seeds` episodes in parallel and aggregates them in seed order.
pub fn monte_carlo(cfg: &MonteCarloConfig) -> Result<RegretReport> {
    if cfg.n_seeds == 0 {
        return Err(Error::InvalidArgument {
            reason: "need at least one seed".into(),
        });
    }
    let horizon = cfg.episode.horizon;
    if cfg.checkpoints.windows(2).any(|w| w[1] <= w[0]) || cfg.checkpoints.last().is_some_and(|&c| c > horizon) {
        return Err(Error::InvalidArgument {
            reason: "checkpoints must be strictly increasing and within the horizon".into(),
        });
    }
    let expected = expected_oracle_cost(
        &cfg.episode.problem,
        &cfg.episode.riccati,
        cfg.episode.noise.sigma2(),
        horizon,
    );
    let per_seed: Vec<SeedSummary> = (0..cfg.n_seeds)
        .into_par_iter()
        .map(|i| {
            let trace = run_episode(
                &cfg.episode,
                EpisodeSeed {
                    master: cfg.master_seed,
                    episode: i as u64,
                },
            )?;
            Ok(summarize(cfg, i, &trace, &expected))
        })
        .collect::<Result<_>>()?;
    Ok(aggregate(cfg, per_seed))
}

fn aggregate(cfg: &MonteCarloConfig, per_seed: Vec<SeedSummary>) -> RegretReport {
    let ok: Vec<&SeedSummary> = per_seed.iter().filter(|s| s.abort_step.is_none()).collect();
    let nc = cfg.checkpoints.len();
    let mut mean_v = Vec::with_capacity(nc);
    let mut median = Vec::with_capacity(nc);
    let mut q10 = Vec::with_capacity(nc);
    let mut q90 = Vec::with_capacity(nc);
    let mut n_positive = Vec::with_capacity(nc);
    let mut raw_mean = Vec::with_capacity(nc);
    for i in 0..nc {
        let mut col: Vec<f64> = ok.iter().map(|s| s.regret[i]).collect();
        let raw: Vec<f64> = ok.iter().map(|s| s.raw_regret[i]).collect();
        mean_v.push(mean(&col));
        raw_mean.push(mean(&raw));
        n_positive.push(col.iter().filter(|v| **v > 0.0).count());
        col.sort_by(f64::total_cmp);
        median.push(quantile(&col, 0.5));
        q10.push(quantile(&col, 0.1));
        q90.push(quantile(&col, 0.9));
    }
    let xs: Vec<f64> = cfg.checkpoints.iter().map(|&c| c as f64).collect();
    let fit = fit_rate(&xs, &mean_v).ok();

    let mean_lambda_min = (0..cfg.lambda_grid.len())
        .map(|i| mean(&ok.iter().map(|s| s.lambda_min[i]).collect::<Vec<_>>()))
        .collect();

    // Update times are identical across seeds unless an episode aborted.
    let update_times: Vec<usize> = ok
        .iter()
        .map(|s| s.updates.iter().map(|u| u.0).collect::<Vec<_>>())
        .min_by_key(|v| v.len())
        .unwrap_or_default();
    let mean_err_sq = update_times
        .iter()
        .enumerate()
        .map(|(k, _)| {
            mean(
                &ok.iter()
                    .map(|s| {
                        let (_, ea, eb) = s.updates[k];
                        (ea * ea).max(eb * eb)
                    })
                    .collect::<Vec<_>>(),
            )
        })
        .collect();

    RegretReport {
        checkpoints: cfg.checkpoints.clone(),
        mean: mean_v,
        median,
        q10,
        q90,
        n_positive,
        raw_mean,
        fit,
        lambda_grid: cfg.lambda_grid.clone(),
        mean_lambda_min,
        update_times,
        mean_err_sq,
        dare_failures: per_seed.iter().map(|s| s.dare_failures).sum(),
        aborted: per_seed.len() - ok.len(),
        per_seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::Scenario;
    use crate::presets;

    fn small(n: usize) -> MonteCarloConfig {
        let ep = EpisodeConfig::new(presets::scalar_easy(), Scenario::BKnown, 2000).unwrap();
        let mut cfg = MonteCarloConfig::new(ep, n, 17);
        cfg.checkpoints = regret::checkpoint_grid(2.0, 0.25, 2000);
        cfg
    }

    #[test]
    fn rerun_is_identical() {
        let cfg = small(3);
        assert_eq!(monte_carlo(&cfg).unwrap(), monte_carlo(&cfg).unwrap());
    }

    #[test]
    fn mean_and_quantiles_are_consistent() {
        let rep = monte_carlo(&small(6)).unwrap();
        for i in 0..rep.checkpoints.len() {
            let avg = rep.per_seed.iter().map(|s| s.regret[i]).sum::<f64>() / 6.0;
            assert!((avg - rep.mean[i]).abs() <= 1e-12 * avg.abs().max(1.0));
            assert!(rep.q10[i] <= rep.median[i] && rep.median[i] <= rep.q90[i]);
        }
    }

    #[test]
    fn rejects_zero_seeds() {
        assert!(monte_carlo(&small(0)).is_err());
        let one = monte_carlo(&small(1)).unwrap();
        assert_eq!(one.mean, one.median);
    }

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
