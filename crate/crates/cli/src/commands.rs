//! Subcommand implementations. Inputs and outputs are files or stdio only.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use rqc_core::analysis::{
    format_oracle_table, frugal_sample, frugal_sample_diluted, oracle_compare, parse_bitstrings,
    uniform_bitstrings, verify_amplitudes, verify_bitstrings, write_bitstrings, FrugalOptions,
    HistogramSpec, DEFAULT_CEILING, DEFAULT_OPEN_COUNT,
};
use rqc_core::circuit::{
    builtin_topology, generate_rqc, parse_circuit, parse_fsim_table, parse_topology,
    serialize_circuit, Circuit, GenerateOptions, Topology,
};
use rqc_core::engine::{
    parse_bitstring, write_amplitudes, AmplitudeRecord, BatchOptions, CheckpointConfig,
    EngineConfig, Simulator, DEFAULT_OPEN_CAP,
};
use rqc_core::order::{parse_plan, serialize_plan, OrderOptions, PlanFile};

use crate::config::RunConfig;
use crate::error::{CliError, Kind};

fn read_input(path: &Path) -> Result<String, CliError> {
    let mut s = String::new();
    if path.as_os_str() == "-" {
        std::io::stdin().read_to_string(&mut s)?;
    } else {
        s = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", path.display())))?;
    }
    Ok(s)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| CliError::new(Kind::Io, format!("{}: {e}", p.display()))),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

fn load_circuit(path: &Path) -> Result<Circuit, CliError> {
    Ok(parse_circuit(&read_input(path)?)?)
}

fn load_plan(path: Option<&PathBuf>) -> Result<Option<PlanFile>, CliError> {
    path.map(|p| Ok(parse_plan(&read_input(p)?)?)).transpose()
}

fn parse_qubits(list: &str) -> Result<Vec<usize>, CliError> {
    if list.trim().is_empty() {
        return Ok(Vec::new());
    }
    list.split(',')
        .map(|q| {
            q.trim()
                .parse()
                .map_err(|_| CliError::usage(format!("bad qubit index `{q}` in --open")))
        })
        .collect()
}

fn tail_qubits(n: usize, k: usize) -> Vec<usize> {
    (n - k.min(n)..n).collect()
}

pub fn batch_options(cfg: &RunConfig) -> BatchOptions {
    BatchOptions {
        order: OrderOptions {
            max_size_log2: cfg.max_size_log2,
            n_candidates: cfg.n_candidates,
            seed: cfg.seed,
            imbalance: cfg.imbalance,
            leaf_size: cfg.leaf_size,
            reconfigure_size: cfg.reconfigure_size,
            metric: cfg.metric,
        },
        engine: EngineConfig {
            workers: cfg.workers,
            batch_log2: cfg.batch_log2,
            precision: cfg.precision,
            memory_limit: cfg.memory_limit,
            checkpoint: cfg.checkpoint_dir.as_ref().map(|dir| CheckpointConfig {
                dir: dir.clone(),
                block_log2: cfg.checkpoint_every_log2,
            }),
        },
        open_cap: DEFAULT_OPEN_CAP,
    }
}

fn simulator(
    circuit: &Circuit,
    open: &[usize],
    plan: Option<&PlanFile>,
    cfg: &RunConfig,
) -> Result<Simulator, CliError> {
    let options = batch_options(cfg);
    Ok(match plan {
        Some(p) => Simulator::with_plan(circuit, open, p, &options)?,
        None => Simulator::new(circuit, open, &options)?,
    })
}

/// Grid with `n` sites, as square as the factors of `n` allow.
pub fn grid_for(n: usize) -> Topology {
    let h = (1..=n)
        .take_while(|h| h * h <= n)
        .filter(|h| n.is_multiple_of(*h))
        .last()
        .unwrap_or(1);
    Topology::grid(n / h, h)
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Built-in topology: sycamore53, zuchongzhi56 or gridWxH.
    #[arg(long, conflicts_with = "topology_file")]
    topology: Option<String>,
    #[arg(long)]
    topology_file: Option<PathBuf>,
    #[arg(long)]
    cycles: usize,
    /// Per-coupler fSim parameter table.
    #[arg(long)]
    fsim_table: Option<PathBuf>,
    /// Omit the single-qubit layer after the last cycle.
    #[arg(long)]
    no_final_layer: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn generate(cfg: &RunConfig, a: &GenerateArgs) -> Result<(), CliError> {
    let topology = match (&a.topology, &a.topology_file) {
        (Some(name), None) => builtin_topology(name)?,
        (None, Some(path)) => parse_topology(&read_input(path)?)?,
        _ => return Err(CliError::usage("give --topology or --topology-file")),
    };
    let mut options = GenerateOptions {
        final_single_layer: !a.no_final_layer,
        ..Default::default()
    };
    if let Some(path) = &a.fsim_table {
        options.fsim = parse_fsim_table(&read_input(path)?)?;
    }
    let circuit = generate_rqc(&topology, a.cycles, cfg.seed, &options)?;
    write_output(a.output.as_deref(), &serialize_circuit(&circuit))
}

#[derive(Args, Debug)]
pub struct OrderArgs {
    /// Circuit file (`-` for stdin).
    #[arg(long, default_value = "-")]
    circuit: PathBuf,
    /// Comma-separated open qubits.
    #[arg(long, default_value = "")]
    open: String,
    /// Where to write the plan file.
    #[arg(long)]
    plan_out: Option<PathBuf>,
}

pub fn order(cfg: &RunConfig, a: &OrderArgs) -> Result<(), CliError> {
    let circuit = load_circuit(&a.circuit)?;
    let sim = simulator(&circuit, &parse_qubits(&a.open)?, None, cfg)?;
    if let Some(p) = &a.plan_out {
        write_output(Some(p), &serialize_plan(&sim.plan_file()))?;
    }
    write_output(None, &(sim.plan().cost.to_json() + "\n"))
}

#[derive(Args, Debug)]
pub struct AmplitudeArgs {
    #[arg(long, default_value = "-")]
    circuit: PathBuf,
    /// Plan file from `order` for the same circuit and open qubits.
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Comma-separated open qubits.
    #[arg(long)]
    open: Option<String>,
    /// Bits of the closed qubits, in qubit order.
    #[arg(long, conflicts_with = "bitstrings")]
    fixed: Option<String>,
    /// File of full bitstrings.
    #[arg(long)]
    bitstrings: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn amplitude(cfg: &RunConfig, a: &AmplitudeArgs) -> Result<(), CliError> {
    let circuit = load_circuit(&a.circuit)?;
    let plan = load_plan(a.plan.as_ref())?;
    let records = match (&a.fixed, &a.bitstrings) {
        (Some(fixed), None) => {
            let open = parse_qubits(a.open.as_deref().unwrap_or(""))?;
            let fixed =
                parse_bitstring(fixed).map_err(|e| CliError::usage(format!("--fixed: {e}")))?;
            simulator(&circuit, &open, plan.as_ref(), cfg)?
                .batch(&fixed)?
                .records()
        }
        (None, Some(path)) => {
            let bits = parse_bitstrings(&read_input(path)?)?;
            let open = match &a.open {
                Some(list) => parse_qubits(list)?,
                None => tail_qubits(circuit.n_qubits(), DEFAULT_OPEN_COUNT),
            };
            let sim = simulator(&circuit, &open, plan.as_ref(), cfg)?;
            let amps = verify_amplitudes(&sim, &bits)?;
            bits.iter()
                .zip(amps)
                .map(|(b, amp)| AmplitudeRecord::new(b, amp))
                .collect()
        }
        _ => return Err(CliError::usage("give --fixed or --bitstrings")),
    };
    let mut out = Vec::new();
    write_amplitudes(&records, &mut out)?;
    write_output(a.output.as_deref(), &String::from_utf8_lossy(&out))
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long, default_value = "-")]
    circuit: PathBuf,
    #[arg(long)]
    count: usize,
    /// Open qubits per amplitude batch (the last ones).
    #[arg(long, default_value_t = DEFAULT_OPEN_COUNT)]
    open_count: usize,
    /// Rejection envelope M.
    #[arg(long, default_value_t = DEFAULT_CEILING)]
    ceiling: f64,
    /// Dilute to this fidelity; only the kept fraction is contracted.
    #[arg(long)]
    fidelity: Option<f64>,
    /// Write sampling statistics as JSON here.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn sample(cfg: &RunConfig, a: &SampleArgs) -> Result<(), CliError> {
    let circuit = load_circuit(&a.circuit)?;
    let options = FrugalOptions {
        open_count: a.open_count,
        ceiling: a.ceiling,
        seed: cfg.seed,
        batch: batch_options(cfg),
    };
    let out = match a.fidelity {
        Some(f) => frugal_sample_diluted(&circuit, a.count, f, &options)?,
        None => frugal_sample(&circuit, a.count, &options)?,
    };
    if let Some(p) = &a.stats_out {
        let s = out.stats;
        let json = serde_json::json!({
            "batches": s.batches,
            "candidates": s.candidates,
            "accepted": s.accepted,
            "acceptance_rate": s.acceptance_rate(),
        });
        write_output(Some(p), &(json.to_string() + "\n"))?;
    }
    write_output(a.output.as_deref(), &write_bitstrings(&out.bitstrings))
}

#[derive(Args, Debug)]
pub struct XebArgs {
    #[arg(long, default_value = "-")]
    circuit: PathBuf,
    #[arg(long)]
    bitstrings: PathBuf,
    /// Plan for the circuit with its last min(6, n) qubits open.
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    /// Upper edge of the last histogram bin in units of N p.
    #[arg(long, default_value_t = 10.0)]
    x_max: f64,
    #[arg(long)]
    report_out: Option<PathBuf>,
    #[arg(long)]
    histogram_out: Option<PathBuf>,
}

pub fn xeb(cfg: &RunConfig, a: &XebArgs) -> Result<(), CliError> {
    if a.bins == 0 || !(a.x_max > 0.0) {
        return Err(CliError::usage("--bins and --x-max must be positive"));
    }
    let circuit = load_circuit(&a.circuit)?;
    let bits = parse_bitstrings(&read_input(&a.bitstrings)?)?;
    let plan = load_plan(a.plan.as_ref())?;
    let spec = HistogramSpec {
        bins: a.bins,
        x_max: a.x_max,
    };
    let v = verify_bitstrings(&circuit, &bits, plan.as_ref(), &batch_options(cfg), spec)?;
    if let Some(p) = &a.histogram_out {
        write_output(Some(p), &v.report.histogram_csv())?;
    }
    write_output(a.report_out.as_deref(), &(v.report.to_json() + "\n"))
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Circuit file; otherwise a grid circuit is generated from --qubits.
    #[arg(long, conflicts_with = "qubits")]
    circuit: Option<PathBuf>,
    #[arg(long, requires = "cycles")]
    qubits: Option<usize>,
    #[arg(long)]
    cycles: Option<usize>,
    /// Number of uniformly drawn bitstrings to compare.
    #[arg(long, default_value_t = 16)]
    count: usize,
    /// Open qubits per contraction (the last ones).
    #[arg(long, default_value_t = DEFAULT_OPEN_COUNT)]
    open_count: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

pub fn verify(cfg: &RunConfig, a: &VerifyArgs) -> Result<(), CliError> {
    let circuit = match (&a.circuit, a.qubits, a.cycles) {
        (Some(path), None, _) => load_circuit(path)?,
        (None, Some(n), Some(cycles)) => {
            if n == 0 {
                return Err(CliError::usage("--qubits must be positive"));
            }
            if n > rqc_core::analysis::STATEVECTOR_MAX_QUBITS {
                return Err(rqc_core::analysis::AnalysisError::TooManyQubits {
                    n,
                    max: rqc_core::analysis::STATEVECTOR_MAX_QUBITS,
                }
                .into());
            }
            generate_rqc(&grid_for(n), cycles, cfg.seed, &GenerateOptions::default())?
        }
        _ => return Err(CliError::usage("give --circuit or --qubits with --cycles")),
    };
    let n = circuit.n_qubits();
    let sim = simulator(&circuit, &tail_qubits(n, a.open_count), None, cfg)?;
    let bits = uniform_bitstrings(n, a.count, cfg.seed);
    let rows = oracle_compare(&sim, &bits)?;
    write_output(a.output.as_deref(), &format_oracle_table(&rows))
}
