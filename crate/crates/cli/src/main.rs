use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use relaynet_cli::experiments;
use relaynet_cli::output::OutputDir;
use relaynet_cli::{CliError, ExperimentConfig, Result};

/// Worker threads for grid points, seeds and Monte-Carlo chunks.
const WORKERS_ENV: &str = "RELAYNET_WORKERS";

#[derive(Parser)]
#[command(name = "relaynet", version, about = "Cascade relay network experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Run this seed only, instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's, else out/<name>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build the networks and write topologies and placements.
    Generate(Common),
    /// Linear-model design at every grid point.
    OptimizeLinear(Common),
    /// Deep-relay training with the noise curriculum.
    OptimizeDr(Common),
    /// BER against noise level for every configured optimizer.
    Sweep(Common),
    /// Median BER over realizations for several relay counts.
    MedianStudy(Common),
    /// Noiseless transfer functions of the optimized networks.
    Transfer(Common),
}

fn load(common: &Common) -> Result<(ExperimentConfig, OutputDir)> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    let out = OutputDir::create(&cfg.output_dir(common.out.as_deref()))?;
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(c) => {
            let (cfg, out) = load(&c)?;
            experiments::generate(&cfg, &out)?;
        }
        Command::OptimizeLinear(c) => {
            let (cfg, out) = load(&c)?;
            experiments::optimize_linear(&cfg, &out)?;
        }
        Command::OptimizeDr(c) => {
            let (cfg, out) = load(&c)?;
            experiments::optimize_dr(&cfg, &out)?;
        }
        Command::Sweep(c) => {
            let (cfg, out) = load(&c)?;
            let results = experiments::sweep(&cfg)?;
            experiments::write_sweep(&cfg, &results, &out)?;
        }
        Command::MedianStudy(c) => {
            let (cfg, out) = load(&c)?;
            let study = experiments::median_study(&cfg)?;
            experiments::write_median_study(&study, &out)?;
        }
        Command::Transfer(c) => {
            let (cfg, out) = load(&c)?;
            let curves = experiments::transfer(&cfg)?;
            experiments::write_transfer(&curves, &out)?;
        }
    }
    Ok(())
}

fn init_workers() -> Result<()> {
    let Ok(v) = std::env::var(WORKERS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .map_err(|_| CliError::Config(format!("{WORKERS_ENV} must be a thread count, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match init_workers().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
