use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hamlearn::harness::{
    emit_results, locality_transitions, run_experiment, threads_from_env, with_thread_pool, write_records, DisorderMode,
    ExperimentConfig, ExperimentKind, OutputFormat,
};
use hamlearn::Error;

/// Learn local Hamiltonians and thermal environments of open spin chains from
/// simulated expectation values.
///
/// The worker pool size can be capped with HAMLEARN_THREADS.
#[derive(Parser)]
#[command(name = "hamlearn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Steady-state recovery error and singular values as inputs are added.
    SteadySweep,
    /// Steady-state recovery under Gaussian noise on every entry.
    NoiseSweep,
    /// Least-squares and PSD-constrained recovery from short-time dynamics
    /// across chain lengths.
    DynamicSize,
    /// Dynamical recovery against the time step, for both stencil orders.
    DynamicDt,
    /// Monte-Carlo variance ratio of the second- and first-order stencils.
    FdVariance,
    /// Print the default configuration as TOML.
    DefaultConfig,
}

#[derive(Args)]
struct Overrides {
    /// TOML configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// csv, or json (alias structured).
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    /// Inputs appended per steady-sweep point.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// seeds: one model, one noise stream per seed. models: a perturbed
    /// model per seed.
    #[arg(long, global = true)]
    disorder_mode: Option<DisorderMode>,
    /// Largest chain length accepted.
    #[arg(long, global = true)]
    max_sites: Option<usize>,
    /// Chain length; for dynamic-size, sweep lengths 2 through this value.
    #[arg(long, global = true)]
    sites: Option<usize>,
}

fn load_config(opts: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut config = match &opts.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(stride) = opts.stride {
        config.steady.stride = stride;
    }
    if let Some(mode) = opts.disorder_mode {
        config.noise.disorder_mode = mode;
    }
    if let Some(cap) = opts.max_sites {
        config.max_sites = Some(cap);
    }
    if let Some(n) = opts.sites {
        config.chain.n_sites = n;
        config.dynamic.sizes = (2..=n.max(2)).collect();
    }
    Ok(config)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Config { .. } | Error::CapExceeded { .. } | Error::InvalidLocality { .. } => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let kind = match cli.command {
        Command::SteadySweep => ExperimentKind::SteadySweep,
        Command::NoiseSweep => ExperimentKind::NoiseSweep,
        Command::DynamicSize => ExperimentKind::DynamicSize,
        Command::DynamicDt => ExperimentKind::DynamicDt,
        Command::FdVariance => ExperimentKind::FdVariance,
        Command::DefaultConfig => {
            print!("{}", ExperimentConfig::default().to_toml_string());
            return Ok(());
        }
    };
    let config = load_config(&cli.opts)?;
    config.validate(kind)?;
    let threads = threads_from_env()?;
    let records = with_thread_pool(threads, || run_experiment(kind, &config))??;
    if kind == ExperimentKind::SteadySweep {
        let dim = config.model.model(config.chain.n_sites)?.dim();
        eprintln!("model dimension {dim}");
        for (locality, at) in locality_transitions(&records) {
            eprintln!("{locality}-local inputs start at cardinality {at}");
        }
    }
    match &cli.opts.out {
        Some(path) => emit_results(&records, path, cli.opts.format)?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write_records(&records, cli.opts.format, &mut lock)?;
            lock.flush().map_err(|source| Error::Io { path: "<stdout>".into(), source })?;
        }
    }
    eprintln!("{} records", records.len());
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hamlearn: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
