use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use serde::Deserialize;

use cec_lqr::cec::{Schedule, DEFAULT_GAMMA, DEFAULT_SCHEDULE_RATIO};
use cec_lqr::estimator::Scenario;
use cec_lqr::harness::{checkpoint_grid, EpisodeConfig, MonteCarloConfig};
use cec_lqr::system::{NoiseKind, NoiseModel};
use cec_lqr::{presets, LqrProblem};

/// Top level of a config file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    /// Root output directory; each experiment writes to `<out>/<name>/`.
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(rename = "experiment", default)]
    pub experiments: Vec<ExperimentSpec>,
}

fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// One of the named presets. Exclusive with `system`.
    pub preset: Option<String>,
    pub system: Option<SystemSpec>,
    pub scenario: String,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default = "default_noise")]
    pub noise: String,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_seeds")]
    pub n_seeds: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Overrides `<out>/<name>`.
    pub out: Option<PathBuf>,
    pub checkpoints: Option<GridSpec>,
    /// Seed index whose trajectory goes to `trace.csv`.
    #[serde(default)]
    pub trace_seed: usize,
    /// Keep every n-th row of `trace.csv`.
    #[serde(default = "default_stride")]
    pub trace_stride: usize,
    /// Error fit uses update times at or after this step.
    #[serde(default = "default_error_from")]
    pub error_fit_from: usize,
    #[serde(default)]
    pub assertions: Assertions,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}
fn default_sigma() -> f64 {
    1.0
}
fn default_noise() -> String {
    "gaussian".into()
}
fn default_seeds() -> usize {
    10
}
fn default_stride() -> usize {
    1
}
fn default_error_from() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub k_stab: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum ScheduleSpec {
    Geometric {
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    EveryStep,
    Explicit {
        times: Vec<usize>,
        ratio: f64,
    },
}

fn default_ratio() -> f64 {
    DEFAULT_SCHEDULE_RATIO
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Geometric {
            ratio: DEFAULT_SCHEDULE_RATIO,
        }
    }
}

/// `⌈10^{start + step·k}⌉ ≤ T`.
#[derive(Debug, Deserialize, Clone, Copy)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub step: f64,
}

/// Optional pass/fail thresholds. Ranges are inclusive `[lo, hi]`.
#[derive(Debug, Default, Deserialize, Clone)]
#[serde(deny_unknown_fields)]
pub struct Assertions {
    pub regret_exponent: Option<[f64; 2]>,
    pub error_exponent: Option<[f64; 2]>,
    pub lambda_exponent_min: Option<f64>,
    pub committed_fraction_min: Option<f64>,
    pub max_aborted: Option<usize>,
}

/// A validated experiment ready to run.
#[derive(Debug)]
pub struct Experiment {
    pub name: String,
    pub mc: MonteCarloConfig,
    pub out: PathBuf,
    pub trace_seed: usize,
    pub trace_stride: usize,
    pub error_fit_from: usize,
    pub assertions: Assertions,
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse(text: &str) -> Result<ConfigFile> {
    let cfg: ConfigFile = toml::from_str(text)?;
    if cfg.experiments.is_empty() {
        bail!("config defines no [[experiment]] tables");
    }
    let mut names: Vec<&str> = cfg.experiments.iter().map(|e| e.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        bail!("duplicate experiment name {:?}", w[0]);
    }
    Ok(cfg)
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        bail!("system.{field} must be a non-empty matrix");
    }
    if rows.iter().any(|r| r.len() != m) {
        bail!("system.{field} has rows of different lengths");
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

impl ExperimentSpec {
    fn problem(&self) -> Result<LqrProblem> {
        match (&self.preset, &self.system) {
            (Some(_), Some(_)) => bail!("set either `preset` or `system`, not both"),
            (None, None) => bail!("one of `preset` or `system` is required"),
            (Some(name), None) => presets::preset(name).with_context(|| {
                format!("unknown preset {name:?} (expected one of {:?})", presets::PRESET_NAMES)
            }),
            (None, Some(s)) => {
                let p = LqrProblem::new(
                    matrix("a", &s.a)?,
                    matrix("b", &s.b)?,
                    matrix("q", &s.q)?,
                    matrix("r", &s.r)?,
                    matrix("k_stab", &s.k_stab)?,
                )?;
                Ok(p)
            }
        }
    }

    fn schedule(&self) -> Result<Schedule> {
        Ok(match &self.schedule {
            ScheduleSpec::Geometric { ratio } => Schedule::geometric(*ratio)?,
            ScheduleSpec::EveryStep => Schedule::every_step(),
            ScheduleSpec::Explicit { times, ratio } => Schedule::explicit(times.clone(), *ratio)?,
        })
    }

    /// Validates the experiment and resolves paths; `seeds` overrides `n_seeds`.
    pub fn build(&self, root: &Path, seeds: Option<usize>) -> Result<Experiment> {
        let ctx = || format!("experiment {:?}", self.name);
        if self.name.is_empty() || self.name.contains(['/', '\\']) || self.name.starts_with('.') {
            bail!("experiment name {:?} is not a plain directory name", self.name);
        }
        if self.horizon < 10 {
            bail!("{}: T must be at least 10, got {}", ctx(), self.horizon);
        }
        let n_seeds = seeds.unwrap_or(self.n_seeds);
        if n_seeds == 0 {
            bail!("{}: n_seeds must be at least 1", ctx());
        }
        if self.trace_seed >= n_seeds {
            bail!("{}: trace_seed {} is not below n_seeds {n_seeds}", ctx(), self.trace_seed);
        }
        if self.trace_stride == 0 {
            bail!("{}: trace_stride must be positive", ctx());
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            bail!("{}: sigma must be finite and nonnegative", ctx());
        }
        let scenario = Scenario::parse(&self.scenario).with_context(|| {
            format!("{}: unknown scenario {:?} (expected both, a_known or b_known)", ctx(), self.scenario)
        })?;
        let kind = NoiseKind::parse(&self.noise)
            .with_context(|| format!("{}: unknown noise {:?}", ctx(), self.noise))?;
        let problem = self.problem().with_context(ctx)?;

        let mut ep = EpisodeConfig::new(problem, scenario, self.horizon).with_context(ctx)?;
        ep.schedule = self.schedule().with_context(ctx)?;
        ep.gamma = self.gamma;
        ep.noise = NoiseModel { kind, sigma: self.sigma };
        ep.hysteresis().with_context(ctx)?;

        let mut mc = MonteCarloConfig::new(ep, n_seeds, self.master_seed);
        let grid = self.checkpoints.unwrap_or(GridSpec {
            start: if self.horizon >= 10_000 { 3.0 } else { 1.0 },
            step: 0.1,
        });
        if !(grid.step > 0.0) || !grid.start.is_finite() {
            bail!("{}: checkpoints need a finite start and a positive step", ctx());
        }
        mc.checkpoints = checkpoint_grid(grid.start, grid.step, self.horizon);
        if mc.checkpoints.is_empty() {
            bail!("{}: checkpoint grid has no points up to T = {}", ctx(), self.horizon);
        }

        Ok(Experiment {
            name: self.name.clone(),
            mc,
            out: self.out.clone().unwrap_or_else(|| root.join(&self.name)),
            trace_seed: self.trace_seed,
            trace_stride: self.trace_stride,
            error_fit_from: self.error_fit_from,
            assertions: self.assertions.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[experiment]]
name = "a"
preset = "scalar-easy"
scenario = "b_known"
T = 2000
"#;

    #[test]
    fn minimal_config_builds_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        assert_eq!(cfg.out, PathBuf::from("results"));
        let e = cfg.experiments[0].build(&cfg.out, None).unwrap();
        assert_eq!(e.mc.n_seeds, 10);
        assert_eq!(e.out, PathBuf::from("results/a"));
        assert_eq!(e.mc.checkpoints.first(), Some(&10));
        assert_eq!(e.mc.episode.gamma, DEFAULT_GAMMA);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let err = parse(&format!("{MINIMAL}gama = 0.3\n")).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("gama"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn short_horizon_is_rejected() {
        let cfg = parse(&MINIMAL.replace("2000", "5")).unwrap();
        let err = cfg.experiments[0].build(&cfg.out, None).unwrap_err();
        assert!(format!("{err:#}").contains("at least 10"));
    }

    #[test]
    fn unstable_stabilizer_names_the_constraint() {
        let text = r#"
[[experiment]]
name = "bad"
scenario = "both"
T = 100
[experiment.system]
a = [[1.2]]
b = [[1.0]]
q = [[1.0]]
r = [[1.0]]
k_stab = [[0.0]]
"#;
        let cfg = parse(text).unwrap();
        let err = cfg.experiments[0].build(&cfg.out, None).unwrap_err();
        assert!(format!("{err:#}").contains("spectral radius"), "{err:#}");
    }

    #[test]
    fn seeds_override_and_schedule_variants() {
        let text = format!("{MINIMAL}schedule = {{ kind = \"explicit\", times = [2, 3, 5, 9], ratio = 2.0 }}\n");
        let cfg = parse(&text).unwrap();
        let e = cfg.experiments[0].build(&cfg.out, Some(3)).unwrap();
        assert_eq!(e.mc.n_seeds, 3);
        assert_eq!(e.mc.episode.schedule.times_up_to(100), vec![2, 3, 5, 9]);
        let bad = format!("{MINIMAL}schedule = {{ kind = \"explicit\", times = [2, 7], ratio = 2.0 }}\n");
        let cfg = parse(&bad).unwrap();
        assert!(cfg.experiments[0].build(&cfg.out, None).is_err());
    }

    #[test]
    fn duplicate_names_are_rejected() {
        assert!(parse(&format!("{MINIMAL}{MINIMAL}")).is_err());
    }
}
