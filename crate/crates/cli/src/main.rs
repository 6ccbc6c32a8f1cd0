use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use stt_sim::commands::{cmd_benchmark_scaling, cmd_oracle, cmd_propagate, cmd_train};
use stt_sim::{CliError, RunConfig};

#[derive(Parser)]
#[command(name = "sttsim", version, about = "Open quantum dynamics under Gaussian noise with tensor-train influence kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory averaging (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides `output.directory`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the transfer functions and write the linking matrices.
    Train(Common),
    /// Propagate the initial state and write observables.
    Propagate {
        #[command(flatten)]
        common: Common,
        /// Linking file to use instead of the one in the output directory.
        #[arg(long)]
        linking: Option<PathBuf>,
    },
    /// Reference results from path sums and trajectory averaging.
    Oracle(Common),
    /// Memory growth of chain propagation with system size.
    BenchmarkScaling(Common),
}

fn load(c: &Common) -> Result<RunConfig, CliError> {
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.output.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output.directory = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(c) => cmd_train(&load(&c)?).map(drop),
        Command::Propagate { common, linking } => cmd_propagate(&load(&common)?, linking.as_deref()).map(drop),
        Command::Oracle(c) => cmd_oracle(&load(&c)?).map(drop),
        Command::BenchmarkScaling(c) => cmd_benchmark_scaling(&load(&c)?).map(drop),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
