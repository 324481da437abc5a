//! Experiment runner CLI:
//! `rfrob <experiment-id> [--config <path>] [--set key=value ...] [--out dir]`.
//!
//! Exit code 0 when every contract in the run passes, 1 on a failed
//! contract, 2 on an execution error. Output root precedence:
//! `--out` flag, then `RFROB_OUT`, then the config's `out_dir`, then `./out`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use rfrob::config::ExperimentConfig;
use rfrob::runner::run_experiment;

#[derive(Parser)]
#[command(name = "rfrob", version, about = "Rough-flow experiment runner")]
struct Cli {
    /// Experiment id: lp-check | para-identity | vanished-decay | flow-cert |
    /// commute-defect | build-chart | sharpness | pde-solve | modulus-lab
    experiment: String,

    /// JSON configuration file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override a config key, e.g. --set grid_n=8192 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,

    /// Output root directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::from_file(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => match ExperimentConfig::default_for(&cli.experiment) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
    };
    if cli.config.is_some() && cfg.experiment != cli.experiment {
        eprintln!(
            "error: config is for `{}` but `{}` was requested",
            cfg.experiment, cli.experiment
        );
        return ExitCode::from(2);
    }
    if let Err(e) = cfg.apply_overrides(&cli.sets) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    let out_root = cli
        .out
        .or_else(|| std::env::var("RFROB_OUT").ok().map(PathBuf::from))
        .or_else(|| cfg.out_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    match run_experiment(&cfg, &out_root) {
        Ok(outcome) => {
            for c in &outcome.checks {
                let op = match c.cmp {
                    rfrob::runner::Cmp::Le => "<=",
                    rfrob::runner::Cmp::Ge => ">=",
                };
                println!(
                    "{} {:<40} {:.6e} {} {:.6e}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    op,
                    c.threshold
                );
            }
            println!(
                "{}: {} ({} checks) -> {}",
                outcome.experiment,
                if outcome.pass { "PASS" } else { "FAIL" },
                outcome.checks.len(),
                outcome.out_dir.display()
            );
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
