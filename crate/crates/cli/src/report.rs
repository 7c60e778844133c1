use std::fs;
use std::path::Path;

use anyhow::{Context, Result};

use cec_lqr::control::riccati_for;
use cec_lqr::diagnostics::mu_star;
use cec_lqr::harness::{
    growth_check, monte_carlo, optimal_cost_rate, run_episode, EpisodeSeed, EpisodeTrace, RateFit, RegretReport,
};

use crate::config::Experiment;
use crate::plot::{LogLogPlot, Series};

pub const TRACE_HEADER: [&str; 8] = ["t", "x_norm_sq", "cost", "branch", "ell", "lambda_min_gate", "errA", "errB"];
pub const REGRET_HEADER: [&str; 6] = ["T", "mean", "median", "q10", "q90", "n_positive"];
pub const SUMMARY_HEADER: [&str; 2] = ["metric", "value"];

/// Result of one experiment: summary rows and assertion verdicts.
pub struct Outcome {
    pub name: String,
    pub summary: Vec<(String, String)>,
    pub assertions: Vec<(String, bool)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.1)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Step used by the commitment statistic: 10⁴, or `T/10` on short runs.
pub fn commitment_check_time(horizon: usize) -> usize {
    10_000.min(horizon / 10)
}

pub fn run_experiment(exp: &Experiment) -> Result<Outcome> {
    let mc = &exp.mc;
    let ep = &mc.episode;
    let report = monte_carlo(mc).with_context(|| format!("running experiment {:?}", exp.name))?;
    let trace = run_episode(
        ep,
        EpisodeSeed {
            master: mc.master_seed,
            episode: exp.trace_seed as u64,
        },
    )?;

    fs::create_dir_all(&exp.out).with_context(|| format!("creating {}", exp.out.display()))?;
    write_trace(&exp.out.join("trace.csv"), &trace, exp.trace_stride)?;
    write_regret(&exp.out.join("regret.csv"), &report)?;

    let horizon = ep.horizon;
    let error_fit = report.error_fit(exp.error_fit_from).ok();
    let lambda_full = report.lambda_fit(0, horizon).ok();
    let commit_max = report.per_seed.iter().filter_map(|s| s.commitment).max();
    let post_from = commit_max.unwrap_or(0).max(mc.commit_warmup);
    let lambda_post = report.lambda_fit(post_from, horizon).ok();
    let check_time = commitment_check_time(horizon);
    let committed = report.committed_fraction(check_time);
    let growth = growth_check(&trace, &ep.problem, &ep.hysteresis()?)?;
    let riccati = riccati_for(&ep.problem)?;

    let mut assertions = Vec::new();
    let a = &exp.assertions;
    let in_range = |v: Option<f64>, r: [f64; 2]| v.is_some_and(|x| x >= r[0] && x <= r[1]);
    if let Some(r) = a.regret_exponent {
        assertions.push(("regret_exponent".to_string(), in_range(report.fit.map(|f| f.exponent), r)));
    }
    if let Some(r) = a.error_exponent {
        assertions.push(("error_exponent".to_string(), in_range(error_fit.map(|f| f.exponent), r)));
    }
    if let Some(m) = a.lambda_exponent_min {
        assertions.push(("lambda_exponent_min".to_string(), lambda_post.is_some_and(|f| f.exponent >= m)));
    }
    if let Some(m) = a.committed_fraction_min {
        assertions.push(("committed_fraction_min".to_string(), committed >= m));
    }
    if let Some(m) = a.max_aborted {
        assertions.push(("max_aborted".to_string(), report.aborted <= m));
    }

    let exponent = |f: Option<RateFit>| opt(f.map(|f| f.exponent));
    let mut summary: Vec<(String, String)> = vec![
        ("experiment".into(), exp.name.clone()),
        ("scenario".into(), ep.scenario.name().into()),
        ("T".into(), horizon.to_string()),
        ("n_seeds".into(), mc.n_seeds.to_string()),
        ("master_seed".into(), mc.master_seed.to_string()),
        ("gamma".into(), ep.gamma.to_string()),
        ("sigma".into(), ep.noise.sigma.to_string()),
        ("noise".into(), ep.noise.kind.name().into()),
        ("j_star".into(), optimal_cost_rate(&riccati).to_string()),
        ("mu_star".into(), mu_star(&riccati).to_string()),
        ("regret_final_mean".into(), opt(report.mean.last().copied())),
        ("regret_final_raw_mean".into(), opt(report.raw_mean.last().copied())),
        ("regret_exponent".into(), exponent(report.fit)),
        ("regret_r2".into(), opt(report.fit.map(|f| f.r2))),
        ("error_exponent".into(), exponent(error_fit)),
        ("error_fit_from".into(), exp.error_fit_from.to_string()),
        ("lambda_exponent_full".into(), exponent(lambda_full)),
        ("lambda_exponent_post".into(), exponent(lambda_post)),
        ("lambda_post_from".into(), post_from.to_string()),
        (
            "commitment_max".into(),
            commit_max.map_or_else(|| "none".into(), |c| c.to_string()),
        ),
        ("commitment_check_time".into(), check_time.to_string()),
        ("committed_fraction".into(), committed.to_string()),
        ("dare_failures".into(), report.dare_failures.to_string()),
        ("aborted".into(), report.aborted.to_string()),
        ("growth_fraction_within".into(), growth.fraction_within.to_string()),
        ("growth_max_ratio".into(), growth.max_ratio.to_string()),
    ];
    for (name, ok) in &assertions {
        summary.push((format!("assert_{name}"), if *ok { "pass" } else { "fail" }.into()));
    }
    let all = assertions.iter().all(|a| a.1);
    summary.push(("assertions".into(), if all { "pass" } else { "fail" }.into()));
    write_summary(&exp.out.join("summary.csv"), &summary)?;
    write_plots(&exp.out, &exp.name, &report)?;

    Ok(Outcome {
        name: exp.name.clone(),
        summary,
        assertions,
    })
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

pub fn write_trace(path: &Path, trace: &EpisodeTrace, stride: usize) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(TRACE_HEADER)?;
    for r in trace.records.iter().filter(|r| r.t % stride == 0) {
        w.write_record([
            r.t.to_string(),
            r.x_norm_sq.to_string(),
            r.cost.to_string(),
            r.branch.name().to_string(),
            r.ell.to_string(),
            r.lambda_min_gate.to_string(),
            r.err_a.map_or_else(String::new, |v| v.to_string()),
            r.err_b.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_regret(path: &Path, rep: &RegretReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(REGRET_HEADER)?;
    for i in 0..rep.checkpoints.len() {
        w.write_record([
            rep.checkpoints[i].to_string(),
            rep.mean[i].to_string(),
            rep.median[i].to_string(),
            rep.q10[i].to_string(),
            rep.q90[i].to_string(),
            rep.n_positive[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary(path: &Path, rows: &[(String, String)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

fn fit_line(fit: &RateFit, xs: &[f64]) -> Vec<(f64, f64)> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    [lo, hi]
        .into_iter()
        .map(|x| (x, fit.intercept.exp() * x.powf(fit.exponent)))
        .collect()
}

fn write_plots(dir: &Path, name: &str, rep: &RegretReport) -> Result<()> {
    let xs: Vec<f64> = rep.checkpoints.iter().map(|&c| c as f64).collect();
    let zip = |ys: &[f64]| xs.iter().copied().zip(ys.iter().copied()).collect::<Vec<_>>();

    let mut regret = LogLogPlot::new(format!("{name}: regret"), "T", "regret (positive part)");
    regret.add(Series::new("mean", "#1f77b4", zip(&rep.mean)));
    regret.add(Series::new("median", "#2ca02c", zip(&rep.median)));
    regret.add(Series::new("q10", "#9ecae1", zip(&rep.q10)).dashed());
    regret.add(Series::new("q90", "#9ecae1", zip(&rep.q90)).dashed());
    if let Some(fit) = rep.fit {
        regret.add(Series::new(format!("fit T^{:.3}", fit.exponent), "#d62728", fit_line(&fit, &xs)).dashed());
    }
    fs::write(dir.join("regret.svg"), regret.render())?;

    let mut lambda = LogLogPlot::new(format!("{name}: covariate spectrum"), "t", "mean lambda_min");
    lambda.add(Series::new(
        "lambda_min",
        "#9467bd",
        rep.lambda_grid.iter().map(|&t| t as f64).zip(rep.mean_lambda_min.iter().copied()),
    ));
    fs::write(dir.join("lambda_min.svg"), lambda.render())?;

    let mut err = LogLogPlot::new(format!("{name}: estimation error"), "t", "mean max(errA^2, errB^2)");
    err.add(Series::new(
        "error",
        "#ff7f0e",
        rep.update_times.iter().map(|&t| t as f64).zip(rep.mean_err_sq.iter().copied()),
    ));
    fs::write(dir.join("error.svg"), err.render())?;
    Ok(())
}
