//! Fixed-seed invariant suites behind `cec-lqr verify`.
//!
//! Every check walks a deterministic list of random instances, compares a
//! scalar metric against a limit and keeps the first failing instance.

use std::fmt;

use rand::Rng;

use crate::control::{
    self, check_perturbation_bounds, cost_difference_residual, dare_residual, p_star_of_k, riccati_for,
    toeplitz_gain, LqrProblem, DEFAULT_ENVELOPE_TOL,
};
use crate::diagnostics::{concentration_probe, selb_bound_check, ProbeConfig, ProbeKind};
use crate::error::{Error, Result};
use crate::estimator::Scenario;
use crate::harness::{regret_decomposition_check, run_episode, EpisodeConfig, EpisodeSeed};
use crate::linalg::{self, Mat, Vector};
use crate::presets;
use crate::random;
use crate::system::RngStream;

/// Master seed shared by all suites.
pub const SUITE_SEED: u64 = 0x5eed_c0de;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    ControlCore,
    Spectral,
    Identity,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::ControlCore, Suite::Spectral, Suite::Identity];

    pub fn name(self) -> &'static str {
        match self {
            Suite::ControlCore => "control_core",
            Suite::Spectral => "spectral",
            Suite::Identity => "identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Limit {
    AtMost(f64),
    AtLeast(f64),
}

impl Limit {
    fn holds(self, v: f64) -> bool {
        match self {
            Limit::AtMost(l) => v <= l,
            Limit::AtLeast(l) => v >= l,
        }
    }

    fn worse(self, a: f64, b: f64) -> f64 {
        match self {
            Limit::AtMost(_) => a.max(b),
            Limit::AtLeast(_) => a.min(b),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::AtMost(l) => write!(f, "<= {l:e}"),
            Limit::AtLeast(l) => write!(f, ">= {l:e}"),
        }
    }
}

/// Outcome of one invariant over its instance list.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub instances: usize,
    pub violations: usize,
    /// Worst metric seen (largest for upper limits, smallest for lower).
    pub worst: f64,
    pub limit: Limit,
    pub counterexample: Option<String>,
}

impl CheckOutcome {
    fn new(name: &'static str, limit: Limit) -> Self {
        let worst = match limit {
            Limit::AtMost(_) => f64::NEG_INFINITY,
            Limit::AtLeast(_) => f64::INFINITY,
        };
        Self {
            name,
            instances: 0,
            violations: 0,
            worst,
            limit,
            counterexample: None,
        }
    }

    /// Records one metric; NaN counts as a violation.
    fn record(&mut self, value: f64, describe: impl FnOnce() -> String) {
        self.instances += 1;
        if value.is_nan() {
            self.worst = f64::NAN;
        } else if !self.worst.is_nan() {
            self.worst = self.limit.worse(self.worst, value);
        }
        if !self.limit.holds(value) {
            self.violations += 1;
            if self.counterexample.is_none() {
                self.counterexample = Some(format!("metric {value:e}: {}", describe()));
            }
        }
    }

    fn fail(&mut self, describe: String) {
        self.instances += 1;
        self.violations += 1;
        if self.counterexample.is_none() {
            self.counterexample = Some(describe);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.instances > 0
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} instances, {} violations, worst {:e} (limit {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.instances,
            self.violations,
            self.worst,
            self.limit
        )?;
        if let Some(c) = &self.counterexample {
            write!(f, "\n  first counterexample: {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn run_suite(suite: Suite) -> Result<SuiteReport> {
    let checks = match suite {
        Suite::ControlCore => vec![
            dare_check(200, SUITE_SEED)?,
            dare_lyapunov_agreement(200, SUITE_SEED)?,
            diffcosts_check(100, SUITE_SEED)?,
            envelope_check(200, 200, SUITE_SEED)?,
            perturbation_check(100, SUITE_SEED)?,
        ],
        Suite::Spectral => {
            let mut v = vec![selb_check(1000, SUITE_SEED)?];
            v.extend(probe_checks(&[0.9, 0.99], SUITE_SEED)?);
            v
        }
        Suite::Identity => vec![identity_check(100, 100, SUITE_SEED)?],
    };
    Ok(SuiteReport { suite, checks })
}

fn stream(seed: u64, salt: u64, i: usize) -> RngStream {
    RngStream::new(seed ^ salt.rotate_left(32), i as u64)
}

fn dims<R: Rng + ?Sized>(rng: &mut R, max_dx: usize) -> (usize, usize) {
    let dx = rng.random_range(1..=max_dx);
    (dx, rng.random_range(1..=dx))
}

/// Relative DARE defect `‖𝓡(P) − P‖_F / (1 + ‖P‖_F)` on random
/// stabilizable systems with `d_x ≤ 5`, including open-loop unstable ones.
pub fn dare_check(n: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("dare_residual", Limit::AtMost(1e-10));
    for i in 0..n {
        let mut s = stream(seed, 1, i);
        let (dx, du) = dims(s.rng(), 5);
        let prob = random::stabilizable_problem(s.rng(), dx, du, 1.2);
        match riccati_for(&prob) {
            Ok(sol) => {
                let res = dare_residual(prob.a(), prob.b(), prob.q(), prob.r(), &sol.p)?;
                let rel = res / (1.0 + linalg::frobenius(&sol.p));
                let stable = linalg::spectral_radius(&prob.closed_loop(&sol.k))? < 1.0;
                out.record(if stable { rel } else { f64::INFINITY }, || {
                    format!("instance {i} (dx={dx}, du={du}), stable closed loop: {stable}")
                });
            }
            Err(e) => out.fail(format!("instance {i} (dx={dx}, du={du}): {e}")),
        }
    }
    Ok(out)
}

/// `P` from the DARE against `𝓛(A+BK⋆, Q+K⋆ᵀRK⋆)`, relative Frobenius.
pub fn dare_lyapunov_agreement(n: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("dare_lyapunov_agreement", Limit::AtMost(1e-8));
    for i in 0..n {
        let mut s = stream(seed, 1, i);
        let (dx, du) = dims(s.rng(), 5);
        let prob = random::stabilizable_problem(s.rng(), dx, du, 1.2);
        let sol = riccati_for(&prob)?;
        let pk = p_star_of_k(&prob, &sol.k)?;
        let rel = linalg::frobenius(&(&pk - &sol.p)) / linalg::frobenius(&sol.p);
        out.record(rel, || format!("instance {i} (dx={dx}, du={du})"));
    }
    Ok(out)
}

/// Random stabilizing gain near `K⋆`: a Gaussian step halved until the
/// closed loop has spectral radius below 0.98.
fn random_stabilizing_gain<R: Rng + ?Sized>(rng: &mut R, prob: &LqrProblem<f64>, k_star: &Mat<f64>) -> Result<Mat<f64>> {
    let dir = random::gaussian_matrix(rng, prob.du(), prob.dx());
    let mut scale = rng.random_range(0.05..1.0);
    for _ in 0..60 {
        let k = k_star + &dir * scale;
        if linalg::spectral_radius(&prob.closed_loop(&k))? < 0.98 {
            return Ok(k);
        }
        scale *= 0.5;
    }
    Ok(k_star.clone())
}

/// Cost-difference identity residual, relative to `1 + ‖P⋆(K)‖_F`.
pub fn diffcosts_check(n: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("diffcosts_residual", Limit::AtMost(1e-8));
    for i in 0..n {
        let mut s = stream(seed, 2, i);
        let (dx, du) = dims(s.rng(), 4);
        let prob = random::stabilizable_problem(s.rng(), dx, du, 1.1);
        let sol = riccati_for(&prob)?;
        let k = random_stabilizing_gain(s.rng(), &prob, &sol.k)?;
        let res = cost_difference_residual(&prob, &sol, &k)?;
        let pk = p_star_of_k(&prob, &k)?;
        let rel = res / (1.0 + linalg::frobenius(&pk));
        out.record(rel, || format!("instance {i} (dx={dx}, du={du}), K = {k:?}"));
    }
    Ok(out)
}

/// `max_k (‖Mᵏ‖ − envelope(k))` for `k ≤ k_max` over random matrices with
/// `ρ(M) ≤ 0.95`.
pub fn envelope_check(n: usize, k_max: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("stability_envelope", Limit::AtMost(1e-9));
    for i in 0..n {
        let mut s = stream(seed, 3, i);
        let d = s.rng().random_range(1..=5);
        let m = random::stable_matrix(s.rng(), d, 0.95);
        let profile = toeplitz_gain(&m, DEFAULT_ENVELOPE_TOL)?;
        let mut power = Mat::identity(d, d);
        let mut worst = f64::NEG_INFINITY;
        let mut worst_k = 0;
        for k in 0..=k_max {
            let gap = linalg::op_norm(&power) - profile.envelope(k);
            if gap > worst {
                worst = gap;
                worst_k = k;
            }
            power = &power * &m;
        }
        out.record(worst, || format!("instance {i} (d={d}) at k={worst_k}, M = {m:?}"));
    }
    Ok(out)
}

/// All five perturbation inequalities on random in-radius perturbations of
/// 2×2 and 3×3 systems. The metric is the number of failed inequalities.
pub fn perturbation_check(n: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("perturbation_bounds", Limit::AtMost(0.0));
    for i in 0..n {
        let mut s = stream(seed, 4, i);
        let dx = 2 + i % 2;
        let du = s.rng().random_range(1..=dx);
        let prob = random::stabilizable_problem(s.rng(), dx, du, 1.05);
        let sol = riccati_for(&prob)?;
        let radius = 1.0 / (control::DEFAULT_RADIUS_CONSTANT * linalg::op_norm(&sol.p).powi(5));
        let frac = s.rng().random_range(0.05..0.95);
        let da = random::gaussian_matrix(s.rng(), dx, dx);
        let db = random::gaussian_matrix(s.rng(), dx, du);
        let a_alt = prob.a() + &da * (frac * radius / linalg::op_norm(&da));
        let b_alt = prob.b() + &db * (s.rng().random_range(0.0..1.0) * frac * radius / linalg::op_norm(&db));
        match check_perturbation_bounds(&prob, &a_alt, &b_alt) {
            Ok(rep) => {
                let failed = if rep.alt_solved {
                    rep.checks.iter().filter(|c| !c.pass).count()
                } else {
                    5
                };
                out.record(failed as f64, || format!("instance {i} (dx={dx}, du={du}): {rep:?}"));
            }
            Err(e) => out.fail(format!("instance {i} (dx={dx}, du={du}): {e}")),
        }
    }
    Ok(out)
}

/// Matrix lower-bound slack, normalized by `1 + ‖Σyyᵀ‖`, on random
/// sequences with `d ≤ 6`, `t ≤ 50`, `λ ∈ {0.1, 1, 10}`, `ε ∈ {0.25, 0.5, 1}`.
pub fn selb_check(n: usize, seed: u64) -> Result<CheckOutcome> {
    const LAMBDAS: [f64; 3] = [0.1, 1.0, 10.0];
    const EPSILONS: [f64; 3] = [0.25, 0.5, 1.0];
    let mut out = CheckOutcome::new("selb_slack", Limit::AtLeast(-1e-8));
    for i in 0..n {
        let mut s = stream(seed, 5, i);
        let rng = s.rng();
        let d = rng.random_range(1..=6);
        let t = rng.random_range(1..=50);
        let lambda = LAMBDAS[i % 3];
        let eps = EPSILONS[(i / 3) % 3];
        let z_scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let xi_scale = 10f64.powf(rng.random_range(-1.0..1.0));
        let mut zs: Vec<Vector<f64>> = Vec::with_capacity(t);
        let mut xis = Vec::with_capacity(t);
        for _ in 0..t {
            let zc = random::gaussian_matrix(rng, d, 1).column(0) * z_scale;
            let xc = random::gaussian_matrix(rng, d, 1).column(0) * xi_scale;
            zs.push(zc);
            xis.push(xc);
        }
        let slack = selb_bound_check(&zs, &xis, lambda, eps)?;
        let mut yy = Mat::zeros(d, d);
        for (z, x) in zs.iter().zip(&xis) {
            let y = z + x;
            yy.ger(1.0, &y, &y, 1.0);
        }
        let scale = 1.0 + linalg::op_norm(&yy);
        out.record(slack / scale, || {
            format!("instance {i}: d={d}, t={t}, lambda={lambda}, eps={eps}, raw slack {slack:e}")
        });
    }
    Ok(out)
}

/// Per-kind probes at each quantile; the metric is the empirical quantile of
/// statistic/bound.
pub fn probe_checks(quantiles: &[f64], seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut v = Vec::new();
    for kind in ProbeKind::ALL {
        let name = match kind {
            ProbeKind::GramDeviation => "probe_gram_deviation",
            ProbeKind::SelfNormalized => "probe_self_normalized",
            ProbeKind::HansonWright => "probe_hanson_wright",
        };
        let mut out = CheckOutcome::new(name, Limit::AtMost(1.0));
        for (j, &q) in quantiles.iter().enumerate() {
            let mut cfg = ProbeConfig::new(kind, 3, 500, q);
            cfg.seed = seed.wrapping_add(j as u64);
            let rep = concentration_probe(&cfg)?;
            out.record(rep.ratio_quantile, || format!("q={q}: {rep:?}"));
        }
        v.push(out);
    }
    Ok(v)
}

/// Stabilizer from the DARE of a 5% perturbed system when that stabilizes
/// the true one, else `K⋆`.
fn detuned_problem(prob: LqrProblem<f64>) -> Result<LqrProblem<f64>> {
    let (a, b, q, r) = (prob.a() * 1.05, prob.b() * 0.95, prob.q().clone(), prob.r().clone());
    if let Ok(sol) = control::solve_dare_matrices(&a, &b, &q, &r, 1e-11, 100_000) {
        if let Ok(p) = LqrProblem::new(prob.a().clone(), prob.b().clone(), q, r, sol.k) {
            return Ok(p);
        }
    }
    Ok(prob)
}

/// Relative per-step decomposition residual (`|lhs − rhs| / (1 + |lhs|)`)
/// over `n` random traces of length `len`.
pub fn identity_check(n: usize, len: usize, seed: u64) -> Result<CheckOutcome> {
    let mut out = CheckOutcome::new("decomposition_residual", Limit::AtMost(1e-8));
    for i in 0..n {
        let mut s = stream(seed, 6, i);
        let prob = match i % 4 {
            0 => {
                let name = presets::PRESET_NAMES[(i / 4) % presets::PRESET_NAMES.len()];
                presets::preset(name).ok_or_else(|| Error::InvalidArgument {
                    reason: format!("unknown preset {name}"),
                })?
            }
            _ => {
                let (dx, du) = dims(s.rng(), 3);
                detuned_problem(random::stabilizable_problem(s.rng(), dx, du, 1.05))?
            }
        };
        let scenario = Scenario::ALL[i % 3];
        let mut cfg = EpisodeConfig::new(prob, scenario, len)?;
        cfg.record_details = true;
        let trace = run_episode(&cfg, EpisodeSeed { master: seed, episode: i as u64 })?;
        let details = trace.details.as_deref().ok_or(Error::InsufficientData { needed: 1, got: 0 })?;
        let rep = regret_decomposition_check(&cfg.problem, &cfg.riccati, details)?;
        let metric = rep.max_abs_residual.max(rep.max_expanded_residual);
        out.record(metric, || {
            format!("trace {i} ({}, dx={}): {rep:?}", scenario.name(), cfg.problem.dx())
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("nope"), None);
    }

    #[test]
    fn outcome_tracks_first_counterexample() {
        let mut c = CheckOutcome::new("x", Limit::AtMost(1.0));
        c.record(0.5, || "a".into());
        assert!(c.passed());
        c.record(2.0, || "b".into());
        c.record(3.0, || "c".into());
        assert_eq!(c.violations, 2);
        assert_eq!(c.worst, 3.0);
        assert!(c.counterexample.as_deref().unwrap().ends_with("b"));
        let mut c = CheckOutcome::new("y", Limit::AtLeast(0.0));
        c.record(f64::NAN, || "nan".into());
        assert!(!c.passed());
    }

    #[test]
    fn small_runs_pass() {
        assert!(dare_check(5, 1).unwrap().passed());
        assert!(diffcosts_check(5, 1).unwrap().passed());
        assert!(envelope_check(5, 50, 1).unwrap().passed());
        assert!(perturbation_check(4, 1).unwrap().passed());
        assert!(selb_check(30, 1).unwrap().passed());
        assert!(identity_check(4, 50, 1).unwrap().passed());
    }
}
