//! `girn` — train group-invariant ReLU classifiers, run training-data
//! reconstruction attacks against them, and evaluate the results with
//! group-invariant metrics.
//!
//! Exit codes: 0 success, 1 usage/config error, 2 runtime failure,
//! 3 verification failure.

mod config;
mod pipeline;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ExperimentConfig, SweepConfig};

#[derive(Parser)]
#[command(name = "girn", version, about = "group-invariant reconstruction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and persist checkpoint + history
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the configured reconstruction attack against a checkpoint
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
        /// Override the first configured reconstruction seed
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Evaluate a reconstruction dump against the training data
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Run the numerical property suite
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        quiet: bool,
    },
    /// Run a Cartesian product of configurations and aggregate the results
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Parallel cells
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
}

fn load_experiment(path: &PathBuf, out: Option<PathBuf>) -> Result<ExperimentConfig, ExitCode> {
    match ExperimentConfig::load(path) {
        Ok(mut config) => {
            if let Some(out) = out {
                config.out = out;
            }
            Ok(config)
        }
        Err(err) => {
            eprintln!("config error: {err:#}");
            Err(ExitCode::from(1))
        }
    }
}

fn runtime(result: anyhow::Result<()>) -> ExitCode {
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap prints help/version through the error path too
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };

    match cli.command {
        Command::Train { config, out, quiet } => match load_experiment(&config, out) {
            Ok(config) => runtime(pipeline::cmd_train(&config, quiet)),
            Err(code) => code,
        },
        Command::Reconstruct {
            config,
            seed,
            out,
            quiet,
        } => match load_experiment(&config, out) {
            Ok(config) => runtime(pipeline::cmd_reconstruct(&config, seed, quiet)),
            Err(code) => code,
        },
        Command::Evaluate { config, out, quiet } => match load_experiment(&config, out) {
            Ok(config) => runtime(pipeline::cmd_evaluate(&config, quiet)),
            Err(code) => code,
        },
        Command::Verify { seed, quiet } => {
            let results = girn::verify::run_suite(seed);
            let mut all_pass = true;
            for check in &results {
                let ok = check.pass();
                all_pass &= ok;
                if !quiet || !ok {
                    println!(
                        "{} {:<55} residual {:.3e}  tolerance {:.1e}",
                        if ok { "PASS" } else { "FAIL" },
                        check.name,
                        check.residual,
                        check.tolerance
                    );
                }
            }
            if all_pass {
                if !quiet {
                    println!("all {} checks passed (seed {seed})", results.len());
                }
                ExitCode::SUCCESS
            } else {
                ExitCode::from(3)
            }
        }
        Command::Sweep {
            config,
            jobs,
            out,
            quiet,
        } => {
            let sweep_config = match SweepConfig::load_from(&config) {
                Ok(mut sc) => {
                    if let Some(out) = out {
                        sc.base.out = out;
                    }
                    sc
                }
                Err(err) => {
                    eprintln!("config error: {err:#}");
                    return ExitCode::from(1);
                }
            };
            runtime(sweep::cmd_sweep(&sweep_config, jobs, quiet))
        }
    }
}
