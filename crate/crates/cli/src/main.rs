use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::error;
use snse_cli::config::{ExperimentConfig, OutputFormat};
use snse_cli::{run_command, CliError, Command};

/// Stochastic Navier-Stokes experiments on the periodic square.
#[derive(Debug, Parser)]
#[command(name = "snse", version)]
struct Args {
    /// One of: simulate, converge-time, converge-space, converge-divfree,
    /// ou-validate, moments, exp-moments, regularity, check-conditions,
    /// estimate-constants.
    command: String,

    /// TOML configuration; defaults apply for omitted keys.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Overrides `[noise] seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides `[output] dir` (and `SNSE_OUT`).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,

    /// Overrides `[output] format`.
    #[arg(long)]
    format: Option<OutputFormat>,
}

fn run(args: Args) -> Result<Vec<String>, CliError> {
    let command: Command = args.command.parse()?;
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Ok(dir) = std::env::var("SNSE_OUT") {
        cfg.output.dir = dir.into();
    }
    if let Some(dir) = args.out {
        cfg.output.dir = dir;
    }
    if let Some(s) = args.seed {
        cfg.noise.seed = s;
    }
    if let Some(f) = args.format {
        cfg.output.format = f;
    }
    let threads = args.threads.unwrap_or_else(rayon::current_num_threads);
    if args.threads.is_some() {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    }
    let outcome = run_command(command, &cfg, threads)?;
    let mut lines = outcome.summary;
    lines.push(format!("manifest {} ({})", outcome.manifest.display(), outcome.hash));
    Ok(lines)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Args::parse()) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            if matches!(e, CliError::Config(_) | CliError::Usage(_)) {
                eprintln!("run `snse --help` for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
