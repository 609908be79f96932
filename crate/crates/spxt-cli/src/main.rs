use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spxt_cli::commands;
use spxt_cli::config::ExperimentConfig;
use spxt_cli::CliError;

/// Simulation and reconstruction for the single-pixel X-ray transform.
#[derive(Parser)]
#[command(name = "spxt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides the noise seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Config override, repeatable: --set solver.alpha=0.1
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Voxelize the configured phantom and write its radial profile.
    Phantom,
    /// Generate a noisy measurement set for the configured phantom.
    Simulate,
    /// Reconstruct a radial profile from a measurement CSV.
    Reconstruct {
        #[arg(long)]
        measurements: PathBuf,
    },
    /// Run the noise × alpha sweep and tabulate SSIM/RMSE per cell.
    Sweep {
        /// Comma-separated noise levels; defaults to the config's sweep.noise.
        #[arg(long, value_delimiter = ',')]
        noise: Option<Vec<f64>>,
        /// Comma-separated regularization weights; defaults to sweep.alpha.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
    },
    /// SSIM/RMSE between two grid files.
    Evaluate {
        #[arg(long)]
        reference: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
    },
    /// Accept/reject two measurement sets within a tolerance.
    Verify {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Maximum allowed per-source deviation ("inf" accepts everything).
        #[arg(long)]
        tol: f64,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path, &cli.set, cli.seed),
        None => Err(CliError::Config("--config is required for this command".into())),
    }
}

/// Config for commands where a file is optional (evaluate): defaults plus
/// any --set overrides.
fn load_config_or_default(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    match &cli.config {
        Some(path) => ExperimentConfig::load(path, &cli.set, cli.seed),
        None => ExperimentConfig::from_toml("schema_version = 1\n", &cli.set, cli.seed),
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    match &cli.command {
        Command::Phantom => commands::cmd_phantom(&load_config(cli)?, &cli.out),
        Command::Simulate => commands::cmd_simulate(&load_config(cli)?, &cli.out),
        Command::Reconstruct { measurements } => {
            commands::cmd_reconstruct(&load_config(cli)?, measurements, &cli.out)
        }
        Command::Sweep { noise, alpha } => {
            let config = load_config(cli)?;
            let noise_list = noise.clone().unwrap_or_else(|| config.sweep.noise.clone());
            let alpha_list = alpha.clone().unwrap_or_else(|| config.sweep.alpha.clone());
            commands::cmd_sweep(&config, &noise_list, &alpha_list, &cli.out)
        }
        Command::Evaluate { reference, candidate } => {
            commands::cmd_evaluate(&load_config_or_default(cli)?, reference, candidate, &cli.out)
        }
        Command::Verify { a, b, tol } => commands::cmd_verify(a, b, *tol, &cli.out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
