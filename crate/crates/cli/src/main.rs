mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use commands::CliError;
use config::ExperimentConfig;

/// Experiment runner for mean-reverting diffusion samplers.
#[derive(Parser)]
#[command(name = "mrsde", version)]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<String>,
    /// Override the NFE list (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    nfe: Option<Vec<usize>>,
    /// Worker threads for chain execution (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run sampling chains and dump trajectories plus a terminal summary.
    Sample,
    /// Sweep an NFE list against a fine-grid reference and report the
    /// empirical convergence order.
    ConvergenceStudy,
    /// Compare all solver families against the analytic terminal law.
    CompareBaselines,
    /// Project trajectories of the requested methods into a shared PCA basis.
    Trajectory,
    /// Report the per-step Taylor convergence-radius ratio.
    RadiusReport,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(path).map_err(CliError::Config)?;
    if let Some(seed) = cli.seed {
        cfg.sampler.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.outputs.dir = out.clone();
    }
    if let Some(nfe) = &cli.nfe {
        if nfe.is_empty() || nfe.iter().any(|&n| n == 0) {
            return Err(CliError::Config("--nfe: entries must be positive".into()));
        }
        cfg.sampler.nfe = nfe[0];
        cfg.nfe_list = Some(nfe.clone());
    }
    cfg.validate().map_err(CliError::Config)?;
    Ok(cfg)
}

fn real_main() -> Result<(), CliError> {
    let cli = Cli::parse();
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(CliError::Config("--workers: must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    let cfg = load_config(&cli)?;
    match cli.command {
        Command::Sample => commands::cmd_sample(&cfg),
        Command::ConvergenceStudy => commands::cmd_convergence_study(&cfg),
        Command::CompareBaselines => commands::cmd_compare_baselines(&cfg),
        Command::Trajectory => commands::cmd_trajectory(&cfg),
        Command::RadiusReport => commands::cmd_radius_report(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("MRSDE_LOG")).init();
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
