//! Numerical checks of the spectral machinery: the matrix lower bound on
//! `Σ y yᵀ` and finite-sample concentration probes.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::control::RiccatiSolution;
use crate::error::{Error, Result};
use crate::harness::montecarlo::quantile;
use crate::linalg::{self, Mat, Vector};
use crate::scalar::Real;
use crate::system::RngStream;

/// `λ_min` of
/// `Σyyᵀ − [Σξξᵀ + (1−ε)Σzzᵀ − ε⁻¹ Sᵀ(Σzzᵀ+λI)⁻¹S − ελI]`, `S = Σ z ξᵀ`,
/// with `y = z + ξ` recomputed from the inputs.
pub fn selb_bound_check<T: Real>(zs: &[Vector<T>], xis: &[Vector<T>], lambda: T, eps: T) -> Result<T> {
    if zs.len() != xis.len() {
        return Err(Error::DimensionMismatch {
            context: "selb sequences",
            expected: zs.len().to_string(),
            got: xis.len().to_string(),
        });
    }
    if !(lambda > T::zero()) || !(eps > T::zero() && eps <= T::one()) {
        return Err(Error::InvalidArgument {
            reason: "need lambda > 0 and eps in (0, 1]".into(),
        });
    }
    let d = zs.first().map_or(0, |z| z.len());
    if zs.iter().chain(xis).any(|v| v.len() != d) {
        return Err(Error::DimensionMismatch {
            context: "selb vectors",
            expected: d.to_string(),
            got: "mixed".into(),
        });
    }
    let mut yy = Mat::zeros(d, d);
    let mut xx = Mat::zeros(d, d);
    let mut zz = Mat::zeros(d, d);
    let mut zx = Mat::zeros(d, d);
    for (z, xi) in zs.iter().zip(xis) {
        let y = z + xi;
        yy.ger(T::one(), &y, &y, T::one());
        xx.ger(T::one(), xi, xi, T::one());
        zz.ger(T::one(), z, z, T::one());
        zx.ger(T::one(), z, xi, T::one());
    }
    let eye = Mat::identity(d, d);
    let reg = &zz + &eye * lambda;
    let chol = linalg::symmetrize(&reg).cholesky().ok_or(Error::IllConditioned {
        context: "selb regularized Gram",
        condition: f64::INFINITY,
    })?;
    let cross = zx.transpose() * chol.solve(&zx);
    let rhs = xx + &zz * (T::one() - eps) - cross / eps - eye * (eps * lambda);
    Ok(linalg::min_eigenvalue(&linalg::symmetrize(&(yy - rhs))))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeKind {
    /// `‖Σ_{s≤t} ξ_sξ_sᵀ − tI‖` against the matrix deviation bound.
    GramDeviation,
    /// `‖S_t(z, ξ)‖` for a predictable `z` against the self-normalized bound.
    SelfNormalized,
    /// `‖ξ‖²` against the Hanson–Wright bound with `M = I`.
    HansonWright,
}

impl ProbeKind {
    pub const ALL: [ProbeKind; 3] = [ProbeKind::GramDeviation, ProbeKind::SelfNormalized, ProbeKind::HansonWright];

    pub fn name(self) -> &'static str {
        match self {
            ProbeKind::GramDeviation => "gram_deviation",
            ProbeKind::SelfNormalized => "self_normalized",
            ProbeKind::HansonWright => "hanson_wright",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeConfig {
    pub kind: ProbeKind,
    pub d: usize,
    /// Number of summed terms (unused by Hanson–Wright).
    pub t: usize,
    pub n_trials: usize,
    /// Confidence level `q`; the bound is evaluated at failure probability `1 − q`.
    pub quantile: f64,
    pub seed: u64,
    /// Scale of the predictable covariates in the self-normalized probe;
    /// 0 makes them vanish.
    pub covariate_scale: f64,
}

impl ProbeConfig {
    pub fn new(kind: ProbeKind, d: usize, t: usize, quantile: f64) -> Self {
        Self {
            kind,
            d,
            t,
            n_trials: 2000,
            quantile,
            seed: 0,
            covariate_scale: 1.0,
        }
    }

    /// `ρ` such that the bound fails with probability at most `1 − q`:
    /// `ln(2/(1−q))` for the two-sided deviation bound, `ln(1/(1−q))`
    /// otherwise.
    pub fn rho(&self) -> f64 {
        let tail = 1.0 - self.quantile;
        match self.kind {
            ProbeKind::GramDeviation => (2.0 / tail).ln(),
            _ => (1.0 / tail).ln(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeReport {
    pub kind: ProbeKind,
    pub quantile: f64,
    pub rho: f64,
    /// Empirical `q`-quantile of the statistic.
    pub empirical: f64,
    /// Bound (mean over trials when it depends on the sample).
    pub bound: f64,
    /// Empirical `q`-quantile of statistic/bound.
    pub ratio_quantile: f64,
    /// Fraction of trials above their bound.
    pub exceedance: f64,
    pub trials: usize,
    pub pass: bool,
}

/// Samples the statistic of `cfg.kind` under standard Gaussian noise
/// (`σ² = 1`) and compares its `q`-quantile with the bound at `ρ`.
pub fn concentration_probe(cfg: &ProbeConfig) -> Result<ProbeReport> {
    if cfg.n_trials < 1000 {
        return Err(Error::InvalidArgument {
            reason: format!("need at least 1000 trials, got {}", cfg.n_trials),
        });
    }
    if !(cfg.quantile > 0.0 && cfg.quantile < 1.0) || cfg.d == 0 {
        return Err(Error::InvalidArgument {
            reason: "quantile must lie in (0, 1) and d must be positive".into(),
        });
    }
    if cfg.kind != ProbeKind::HansonWright && cfg.t == 0 {
        return Err(Error::InvalidArgument {
            reason: "t must be positive".into(),
        });
    }
    let rho = cfg.rho();
    if cfg.kind == ProbeKind::SelfNormalized && rho < 1.0 {
        return Err(Error::NotApplicable {
            reason: format!("self-normalized bound needs rho >= 1, got {rho}"),
        });
    }
    let samples: Vec<(f64, f64)> = (0..cfg.n_trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = RngStream::new(cfg.seed, trial as u64);
            match cfg.kind {
                ProbeKind::GramDeviation => gram_trial(cfg, rho, &mut rng),
                ProbeKind::SelfNormalized => self_normalized_trial(cfg, rho, &mut rng),
                ProbeKind::HansonWright => hanson_wright_trial(cfg, rho, &mut rng),
            }
        })
        .collect();
    let mut stats: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let mut ratios: Vec<f64> = samples.iter().map(|s| s.0 / s.1).collect();
    stats.sort_by(f64::total_cmp);
    ratios.sort_by(f64::total_cmp);
    let exceed = samples.iter().filter(|s| s.0 > s.1).count();
    let ratio_quantile = quantile(&ratios, cfg.quantile);
    Ok(ProbeReport {
        kind: cfg.kind,
        quantile: cfg.quantile,
        rho,
        empirical: quantile(&stats, cfg.quantile),
        bound: samples.iter().map(|s| s.1).sum::<f64>() / samples.len() as f64,
        ratio_quantile,
        exceedance: exceed as f64 / samples.len() as f64,
        trials: samples.len(),
        pass: ratio_quantile <= 1.0,
    })
}

fn normal_vec(rng: &mut RngStream, d: usize) -> Vector<f64> {
    Vector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng.rng())))
}

/// `8σ²‖m‖₂² max(√((2ρ+5d)/r²), (2ρ+5d)/r²)` with `m_s = 1`, `r² = t`.
pub fn gram_deviation_bound(d: usize, t: usize, rho: f64) -> f64 {
    let tf = t as f64;
    let ratio = (2.0 * rho + 5.0 * d as f64) / tf;
    8.0 * tf * ratio.sqrt().max(ratio)
}

/// `σ²(‖M‖_F² + 2‖MᵀM‖_F√ρ + 2‖MᵀM‖ρ)`.
pub fn hanson_wright_bound(m: &Mat<f64>, rho: f64) -> f64 {
    let mtm = m.transpose() * m;
    m.norm_squared() + 2.0 * mtm.norm() * rho.sqrt() + 2.0 * linalg::op_norm(&mtm) * rho
}

fn gram_trial(cfg: &ProbeConfig, rho: f64, rng: &mut RngStream) -> (f64, f64) {
    let d = cfg.d;
    let mut s = Mat::<f64>::zeros(d, d);
    for _ in 0..cfg.t {
        let xi = normal_vec(rng, d);
        s.ger(1.0, &xi, &xi, 1.0);
    }
    s -= Mat::identity(d, d) * cfg.t as f64;
    (linalg::op_norm(&s), gram_deviation_bound(d, cfg.t, rho))
}

fn self_normalized_trial(cfg: &ProbeConfig, rho: f64, rng: &mut RngStream) -> (f64, f64) {
    let d = cfg.d;
    let mut zz = Mat::<f64>::zeros(d, d);
    let mut zx = Mat::<f64>::zeros(d, d);
    // z_s = 0.9 z_{s−1} + ξ_{s−1}: determined before ξ_s is drawn.
    let mut z = Vector::<f64>::zeros(d);
    for _ in 0..cfg.t {
        let xi = normal_vec(rng, d);
        let zs = &z * cfg.covariate_scale;
        zz.ger(1.0, &zs, &zs, 1.0);
        zx.ger(1.0, &zs, &xi, 1.0);
        z = &z * 0.9 + &xi;
    }
    let reg = &zz + Mat::identity(d, d);
    let chol = reg.clone().cholesky().expect("Σzzᵀ + I is positive definite");
    let stat = linalg::op_norm(&(zx.transpose() * chol.solve(&zx)));
    // log det(V⁻¹Σzzᵀ + I) with V = I
    let log_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    let bound = 2.0 * log_det + 7.0 * d as f64 + 4.0 * rho;
    (stat, bound)
}

fn hanson_wright_trial(cfg: &ProbeConfig, rho: f64, rng: &mut RngStream) -> (f64, f64) {
    let xi = normal_vec(rng, cfg.d);
    (xi.norm_squared(), hanson_wright_bound(&Mat::identity(cfg.d, cfg.d), rho))
}

/// `μ⋆ = √min(λ_min(K⋆K⋆ᵀ), 1)`.
pub fn mu_star<T: Real>(riccati: &RiccatiSolution<T>) -> T {
    let kk = &riccati.k * riccati.k.transpose();
    linalg::min_eigenvalue(&kk).max(T::zero()).min(T::one()).sqrt()
}
