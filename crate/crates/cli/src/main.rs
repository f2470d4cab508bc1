//! Batch front-end for Dirac eigenvalue computations in a conformal class:
//! weighted spectra, λ̄ₖᵖ minimization runs with checkpoint/resume, the
//! acceptance verification matrix, and columnar plot data.
//!
//! Exit codes: 0 success, 1 verification failure, 2 configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "diracopt",
    version,
    about = "Dirac eigenvalue minimization in a conformal class"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flag overrides on top of the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Eigenvalue index k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Seed for the run and the random initial factor.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Basis cutoff (max |μ|).
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Grid resolution.
    #[arg(long)]
    pub grid_resolution: Option<u32>,
    /// Iteration budget per continuation stage.
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Run identifier (directory name under the output root).
    #[arg(long)]
    pub run_id: Option<String>,
    /// Output root directory (DIRACOPT_OUT overrides both).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the weighted eigenproblem for the configured factor.
    Spectrum {
        /// TOML run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Minimize λ̄ₖᵖ with p continuation; writes trace, checkpoints, summary.
    Minimize {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Resume from a checkpoint file written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Stop after this many global iterations (writes a checkpoint).
        #[arg(long)]
        stop_after: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the acceptance criteria and print the pass/fail matrix.
    Verify {
        /// Run a single criterion by name.
        #[arg(long)]
        only: Option<String>,
        /// Output root for the measurement report.
        #[arg(long, default_value = "runs")]
        out: String,
    },
    /// Export columnar plot data for a finished run.
    Plotdata {
        /// Run identifier under the output root.
        run_id: String,
        #[arg(long, default_value = "runs")]
        out: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            // Configuration problems exit 2; everything else is an internal
            // failure reported as 2 as well since it prevented the run.
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Spectrum { config, overrides } => {
            let cfg = commands::effective_config(config.as_ref(), &overrides)?;
            commands::cmd_spectrum(&cfg)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Minimize {
            config,
            resume,
            stop_after,
            overrides,
        } => {
            let cfg = commands::effective_config(config.as_ref(), &overrides)?;
            commands::cmd_minimize(&cfg, resume.as_deref(), stop_after)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { only, out } => {
            let root = std::env::var("DIRACOPT_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from(out));
            let all_passed = commands::cmd_verify(only.as_deref(), &root)?;
            Ok(if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Plotdata { run_id, out } => {
            let root = std::env::var("DIRACOPT_OUT")
                .map(PathBuf::from)
                .unwrap_or_else(|_| PathBuf::from(out));
            commands::cmd_plotdata(&root, &run_id)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
