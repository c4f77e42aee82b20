//! `rqc`: generate circuits, search contraction orders, compute amplitudes,
//! sample bitstrings and score them.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rqc_core::order::Metric;
use rqc_core::tensor::Precision;

use config::{resolve, Overrides, CONFIG_ENV};
use error::{CliError, Kind};

#[derive(Parser, Debug)]
#[command(
    name = "rqc",
    version,
    about = "Tensor-network simulator for random quantum circuits"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Config file of `key = value` lines (default: $RQC_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// log2 bound on intermediate tensor size.
    #[arg(long = "maxsize", global = true)]
    max_size_log2: Option<usize>,
    /// Order search candidates.
    #[arg(long = "candidates", global = true)]
    n_candidates: Option<usize>,
    /// Worker threads (0 = all).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// single or mixed.
    #[arg(long, global = true)]
    precision: Option<Precision>,
    #[arg(long = "batch-log2", global = true)]
    batch_log2: Option<usize>,
    /// Heap budget in bytes for intermediates across all workers.
    #[arg(long = "memory-limit", global = true)]
    memory_limit: Option<u64>,
    #[arg(long = "checkpoint-dir", global = true)]
    checkpoint_dir: Option<PathBuf>,
    /// Checkpoint every 2^N slices.
    #[arg(long = "checkpoint-every-log2", global = true)]
    checkpoint_every_log2: Option<u32>,
    /// Allowed bisection imbalance.
    #[arg(long, global = true)]
    imbalance: Option<f64>,
    /// Parts at most this size are ordered exhaustively.
    #[arg(long = "leaf-size", global = true)]
    leaf_size: Option<usize>,
    /// Subtree size for reconfiguration after slicing.
    #[arg(long = "reconfigure-size", global = true)]
    reconfigure_size: Option<usize>,
    /// Candidate ranking: flops or benchmark.
    #[arg(long, global = true, value_parser = config::parse_metric)]
    metric: Option<Metric>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a seeded random circuit.
    Generate(commands::GenerateArgs),
    /// Search a sliced contraction order; prints the cost JSON.
    Order(commands::OrderArgs),
    /// Contract amplitudes; prints JSON lines.
    Amplitude(commands::AmplitudeArgs),
    /// Frugal rejection sampling, optionally diluted to a target fidelity.
    Sample(commands::SampleArgs),
    /// XEB report and Porter-Thomas histogram for a bitstring file.
    Xeb(commands::XebArgs),
    /// Compare contracted amplitudes with the statevector simulator.
    Verify(commands::VerifyArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    let path = g
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let text = match &path {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let flags = Overrides {
        seed: g.seed,
        max_size_log2: g.max_size_log2,
        n_candidates: g.n_candidates,
        workers: g.workers,
        precision: g.precision,
        batch_log2: g.batch_log2,
        memory_limit: g.memory_limit,
        checkpoint_dir: g.checkpoint_dir.clone(),
        checkpoint_every_log2: g.checkpoint_every_log2,
        imbalance: g.imbalance,
        leaf_size: g.leaf_size,
        reconfigure_size: g.reconfigure_size,
        metric: g.metric,
    };
    let cfg = resolve(text.as_deref(), &flags)?;
    log::debug!("config:\n{}", cfg.to_file());
    match &cli.command {
        Command::Generate(a) => commands::generate(&cfg, a),
        Command::Order(a) => commands::order(&cfg, a),
        Command::Amplitude(a) => commands::amplitude(&cfg, a),
        Command::Sample(a) => commands::sample(&cfg, a),
        Command::Xeb(a) => commands::xeb(&cfg, a),
        Command::Verify(a) => commands::verify(&cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::usage(e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
