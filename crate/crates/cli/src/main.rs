mod config;
mod plot;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};

use cec_lqr::suites::{run_suite, Suite};

#[derive(Parser)]
#[command(name = "cec-lqr", version, about = "Certainty-equivalence adaptive LQR experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every experiment of a config file and write CSV/SVG artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output root, overriding `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of seeds for every experiment, overriding the config.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a fixed-seed invariant suite.
    Verify {
        #[arg(value_enum)]
        suite: SuiteArg,
        #[arg(long)]
        quiet: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum SuiteArg {
    ControlCore,
    Spectral,
    Identity,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::ControlCore => Suite::ControlCore,
            SuiteArg::Spectral => Suite::Spectral,
            SuiteArg::Identity => Suite::Identity,
        }
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, seeds: Option<usize>, quiet: bool) -> Result<bool> {
    let file = config::load(&config)?;
    let root = out.unwrap_or_else(|| file.out.clone());
    // validate everything before spending time on any run
    let experiments = file
        .experiments
        .iter()
        .map(|e| e.build(&root, seeds))
        .collect::<Result<Vec<_>>>()?;

    let mut all_ok = true;
    for exp in &experiments {
        if !quiet {
            eprintln!(
                "running {} ({}, T = {}, {} seeds)",
                exp.name,
                exp.mc.episode.scenario.name(),
                exp.mc.episode.horizon,
                exp.mc.n_seeds
            );
        }
        let outcome = report::run_experiment(exp)?;
        all_ok &= outcome.passed();
        if !quiet {
            let get = |k: &str| {
                outcome
                    .summary
                    .iter()
                    .find(|r| r.0 == k)
                    .map_or("NA", |r| r.1.as_str())
                    .to_string()
            };
            println!(
                "{}: regret exponent {}, error exponent {}, committed fraction {} -> {}",
                outcome.name,
                get("regret_exponent"),
                get("error_exponent"),
                get("committed_fraction"),
                exp.out.display()
            );
            for (name, ok) in &outcome.assertions {
                println!("  {} {name}", if *ok { "PASS" } else { "FAIL" });
            }
        }
    }
    Ok(all_ok)
}

fn verify(suite: Suite, quiet: bool) -> Result<bool> {
    let rep = run_suite(suite)?;
    for c in &rep.checks {
        if !quiet || !c.passed() {
            println!("{c}");
        }
    }
    println!("{}: {}", suite.name(), if rep.passed() { "ok" } else { "FAILED" });
    Ok(rep.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seeds,
            quiet,
        } => run(config, out, seeds, quiet),
        Command::Verify { suite, quiet } => verify(suite.into(), quiet),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
