use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use alphamill::pipeline::{
    cmd_allocate, cmd_ensemble, cmd_gen_data, cmd_quality, cmd_run_all, cmd_search, load_config,
    PipelineError,
};

/// Alpha mining, backtesting, ensembling, and allocation over daily
/// equity panels.
#[derive(Parser)]
#[command(name = "alphamill", version, about)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the config's global seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cap worker threads (results are identical at any setting).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Override the config's output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Data-quality reports and recommended lookback windows per field.
    Quality,
    /// Hill-climb the expression space and write the alpha archive.
    Search,
    /// Randomized ensemble composition study over the archive.
    Ensemble,
    /// Weighting-scheme comparison, baselines, and mean-variance climb.
    Allocate,
    /// All stages in sequence.
    RunAll,
    /// Write the configured panel as a long-format CSV.
    GenData,
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| PipelineError::Config(format!("thread pool: {e}")))?;
    }
    let config_path = cli
        .config
        .ok_or_else(|| PipelineError::Config("--config PATH is required".to_string()))?;
    let mut cfg = load_config(&config_path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    match cli.command {
        Command::Quality => cmd_quality(&cfg),
        Command::Search => cmd_search(&cfg),
        Command::Ensemble => cmd_ensemble(&cfg),
        Command::Allocate => cmd_allocate(&cfg),
        Command::RunAll => cmd_run_all(&cfg),
        Command::GenData => cmd_gen_data(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
