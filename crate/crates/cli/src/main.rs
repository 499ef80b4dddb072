//! `critwave`: command-line driver for the radial critical-wave experiments.
//!
//! Exit status: 0 on success, 2 on invalid configuration (nothing written),
//! 3 on a numerical failure (`error.json` written to the output directory).

mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;

use config::{Experiment, RunConfig};
use output::Artifacts;
use run::{Failure, Run};

const DEFAULT_OUT: &str = "critwave-out";

#[derive(Debug, Parser)]
#[command(name = "critwave", version, about = "Steady states, spectra and dynamics of the radial defocusing critical wave equation with potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel scans.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for random perturbations (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Catalog of radial steady states.
    Steady,
    /// Negative spectrum of the linearized operator.
    Spectrum,
    /// Time evolution with energy, exterior-energy and distance traces.
    Evolve,
    /// Exterior energy outside r = R + |t| in both time directions.
    Channel,
    /// Final steady state of an evolution.
    Resolve,
    /// Bisection for the threshold along a one-parameter family.
    Threshold,
    /// Sign-changing state of the two-bubble potential.
    ExcitedConstruct {
        #[arg(long)]
        lambda: Option<f64>,
    },
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Steady => Experiment::Steady,
            Command::Spectrum => Experiment::Spectrum,
            Command::Evolve => Experiment::Evolve,
            Command::Channel => Experiment::Channel,
            Command::Resolve => Experiment::Resolve,
            Command::Threshold => Experiment::Threshold,
            Command::ExcitedConstruct { .. } => Experiment::ExcitedConstruct,
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig, String> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", p.display()))
        }
    }
}

fn manifest(cfg: &RunConfig, experiment: Experiment, files: &[String]) -> serde_json::Value {
    json!({
        "tool": "critwave",
        "version": env!("CARGO_PKG_VERSION"),
        "core_version": critwave::VERSION,
        "experiment": experiment.name(),
        "seed": cfg.seed,
        "config": cfg,
        "files": files,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let experiment = cli.command.experiment();

    let mut cfg = match load_config(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(e) = cfg.experiment {
        if e != experiment {
            eprintln!("error: config is for `{}` but `{}` was requested", e.name(), experiment.name());
            return ExitCode::from(2);
        }
    }
    let out_dir = cli.out.clone().or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    if let Some(j) = cli.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let grid = match cfg.grid() {
        Ok(g) => g,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let lambda = match cli.command {
        Command::ExcitedConstruct { lambda } => lambda,
        _ => None,
    };
    let runner = Run { cfg: &cfg, grid, lambda };
    let result = match experiment {
        Experiment::Steady => runner.steady(),
        Experiment::Spectrum => runner.spectrum(),
        Experiment::Evolve => runner.evolve(),
        Experiment::Channel => runner.channel(),
        Experiment::Resolve => runner.resolve(),
        Experiment::Threshold => runner.threshold(),
        Experiment::ExcitedConstruct => runner.excited(),
    };
    match result {
        Ok(mut artifacts) => {
            let mut files = artifacts.names();
            files.push("manifest.json".into());
            artifacts.json("manifest.json", &manifest(&cfg, experiment, &files));
            if let Err(e) = artifacts.write_to(&out_dir) {
                eprintln!("error: writing {}: {e}", out_dir.display());
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(err)) => {
            eprintln!("numerical failure: {err}");
            let mut a = Artifacts::default();
            a.json(
                "error.json",
                &json!({
                    "experiment": experiment.name(),
                    "error": err.to_string(),
                    "kind": format!("{err:?}"),
                    "config": cfg,
                }),
            );
            if let Err(e) = a.write_to(&out_dir) {
                eprintln!("error: writing {}: {e}", out_dir.display());
            }
            ExitCode::from(3)
        }
    }
}
