//! Sliced contraction execution.
//!
//! Slices are summed by a fixed pairwise tree over the slice index range
//! (split at the midpoint), so the result is bit-identical for every worker
//! count and schedule. Independent halves run in parallel.

mod batch;
mod checkpoint;

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use num_complex::Complex32;
use thiserror::Error;

use crate::network::{NetworkError, TensorNetwork};
use crate::order::{ContractionPlan, OrderError, TreeNode};
use crate::parallel;
use crate::tensor::{contract_fused_with_stats, KernelConfig, Precision, Tensor, TensorError};

pub use batch::{
    amplitudes_batch, format_bitstring, parse_amplitudes, parse_bitstring, write_amplitudes,
    AmplitudeBatch, AmplitudeRecord, BatchOptions, Simulator, DEFAULT_OPEN_CAP,
};
pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(
        "tree node {node} produces a tensor of 2^{log2} entries ({bytes} bytes per worker, {workers} workers) \
         beyond the {limit} byte budget; search again with a smaller max size"
    )]
    OutOfMemory {
        node: usize,
        log2: usize,
        bytes: u128,
        workers: usize,
        limit: u64,
    },
    #[error("slice index {index} out of range for {n_slices} slices")]
    SliceOutOfRange { index: u128, n_slices: u128 },
    #[error("{0} slices exceed what one run can enumerate")]
    TooManySlices(u128),
    #[error("{open} open qubits exceed the batch cap of {cap}")]
    OpenCapExceeded { open: usize, cap: usize },
    #[error("bad bitstring: {0}")]
    BadBitstring(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("amplitude record line {line}: {message}")]
    Record { line: usize, message: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckpointConfig {
    pub dir: PathBuf,
    /// Partial sums are written for every aligned block of `2^block_log2` slices.
    pub block_log2: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EngineConfig {
    /// Worker threads; 0 uses the enclosing pool.
    pub workers: usize,
    pub batch_log2: usize,
    pub precision: Precision,
    /// Heap budget for one intermediate times the worker count.
    pub memory_limit: u64,
    pub checkpoint: Option<CheckpointConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            workers: 0,
            batch_log2: 13,
            precision: Precision::Single,
            memory_limit: 4 << 30,
            checkpoint: None,
        }
    }
}

impl EngineConfig {
    fn kernel(&self) -> KernelConfig {
        KernelConfig {
            batch_log2: self.batch_log2,
            ..Default::default()
        }
    }
}

/// Counters of one execution.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Telemetry {
    pub slices: u128,
    /// Complex multiply-adds executed (slices restored from checkpoints included).
    pub macs: u128,
    pub seconds: f64,
}

impl Telemetry {
    pub fn flops(&self) -> u128 {
        self.macs * 8
    }

    pub fn flops_per_second(&self) -> f64 {
        if self.seconds > 0.0 {
            self.flops() as f64 / self.seconds
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    /// Result over the open labels in open order (rank 0 for one amplitude).
    pub tensor: Tensor,
    pub telemetry: Telemetry,
}

/// Contracts slice `index` of the plan: sliced labels take the bits of
/// `index`, first sliced label most significant. Returns the tensor over the
/// open labels and the multiply-add count.
pub fn contract_slice_with_stats(
    net: &TensorNetwork,
    plan: &ContractionPlan,
    index: u128,
    config: &EngineConfig,
) -> Result<(Tensor, u128), EngineError> {
    let n_slices = plan.slices.n_slices();
    if index >= n_slices {
        return Err(EngineError::SliceOutOfRange { index, n_slices });
    }
    let values = plan.slices.values(index);
    let labels = &plan.slices.labels;
    let kernel = config.kernel();
    let tree = &plan.tree;
    let mut slots: Vec<Option<Tensor>> = vec![None; tree.nodes().len()];
    let mut macs: u128 = 0;
    let root = tree.root();
    for i in tree.postorder() {
        let t = match tree.nodes()[i] {
            TreeNode::Leaf(id) => {
                let leaf = net.node(id).ok_or(NetworkError::MissingNode(id))?;
                leaf.slice_many(labels, &values)?
            }
            TreeNode::Internal(l, r) => {
                let a = slots[l].take().expect("left operand");
                let b = slots[r].take().expect("right operand");
                // a batch must hold every shared index
                let shared = a.labels().iter().filter(|l| b.labels().contains(l)).count();
                let (c, stats) = if shared > kernel.batch_log2 {
                    contract_fused_with_stats(
                        &a,
                        &b,
                        &KernelConfig {
                            batch_log2: shared,
                            ..kernel.clone()
                        },
                    )?
                } else {
                    contract_fused_with_stats(&a, &b, &kernel)?
                };
                macs += stats.macs as u128;
                if config.precision == Precision::Mixed && i != root {
                    c.with_precision(Precision::Mixed)
                } else {
                    c
                }
            }
        };
        slots[i] = Some(t);
    }
    let out = slots[root]
        .take()
        .expect("root")
        .with_precision(Precision::Single);
    Ok((out.permute(net.open_labels())?, macs))
}

pub fn contract_slice(
    net: &TensorNetwork,
    plan: &ContractionPlan,
    index: u128,
    config: &EngineConfig,
) -> Result<Tensor, EngineError> {
    contract_slice_with_stats(net, plan, index, config).map(|(t, _)| t)
}

/// Rejects plans whose largest intermediate would not fit the budget.
pub fn check_memory(
    plan: &ContractionPlan,
    net: &TensorNetwork,
    config: &EngineConfig,
) -> Result<(), EngineError> {
    let shape = crate::order::NetShape::new(net);
    let sliced = shape.slice_mask(&plan.slices)?;
    let sets = shape.node_sets(&plan.tree);
    let workers = if config.workers == 0 {
        parallel::current_workers()
    } else {
        config.workers
    };
    for i in plan.tree.postorder() {
        let log2 = sets[i].difference_count(&sliced);
        let bytes = (8u128 << log2) * workers as u128;
        if bytes > config.memory_limit as u128 {
            return Err(EngineError::OutOfMemory {
                node: i,
                log2,
                bytes: 8u128 << log2,
                workers,
                limit: config.memory_limit,
            });
        }
    }
    Ok(())
}

struct Run<'a> {
    net: &'a TensorNetwork,
    plan: &'a ContractionPlan,
    config: &'a EngineConfig,
    fingerprint: u64,
    done: AtomicU64,
    report_every: u64,
    total: u64,
    start: Instant,
}

impl Run<'_> {
    fn reduce(&self, lo: u64, hi: u64) -> Result<(Tensor, u128), EngineError> {
        if let Some(ck) = &self.config.checkpoint {
            let block = 1u64 << ck.block_log2;
            if hi - lo == block && lo.is_multiple_of(block) && self.total > 1 {
                let path = checkpoint::block_path(&ck.dir, ck.block_log2, lo / block);
                if let Some(c) =
                    checkpoint::load_matching(&path, self.fingerprint, ck.block_log2, lo / block)?
                {
                    self.progress(block);
                    return Ok((c.partial, c.macs));
                }
                let (t, macs) = self.split(lo, hi)?;
                let c = Checkpoint {
                    fingerprint: self.fingerprint,
                    block_log2: ck.block_log2,
                    block_index: lo / block,
                    macs,
                    partial: t,
                };
                checkpoint::store(&path, &c)?;
                return Ok((c.partial, macs));
            }
        }
        self.split(lo, hi)
    }

    fn split(&self, lo: u64, hi: u64) -> Result<(Tensor, u128), EngineError> {
        if hi - lo == 1 {
            let r = contract_slice_with_stats(self.net, self.plan, lo as u128, self.config)?;
            self.progress(1);
            return Ok(r);
        }
        let mid = lo + (hi - lo) / 2;
        let (a, b) = parallel::join(|| self.reduce(lo, mid), || self.reduce(mid, hi));
        let ((ta, ma), (tb, mb)) = (a?, b?);
        Ok((ta.add(&tb)?, ma + mb))
    }

    fn progress(&self, n: u64) {
        let before = self.done.fetch_add(n, Ordering::Relaxed);
        let after = before + n;
        if before / self.report_every != after / self.report_every || after == self.total {
            let secs = self.start.elapsed().as_secs_f64();
            log::info!("{after}/{} slices in {secs:.2} s", self.total);
        }
    }
}

/// Sums every slice of the plan with `config.workers` threads.
pub fn execute(
    net: &TensorNetwork,
    plan: &ContractionPlan,
    config: &EngineConfig,
) -> Result<Execution, EngineError> {
    let n_slices = plan.slices.n_slices();
    if n_slices > 1u128 << 62 {
        return Err(EngineError::TooManySlices(n_slices));
    }
    check_memory(plan, net, config)?;
    let total = n_slices as u64;
    let fingerprint = match &config.checkpoint {
        Some(_) => checkpoint::fingerprint(net, plan),
        None => 0,
    };
    if let Some(ck) = &config.checkpoint {
        std::fs::create_dir_all(&ck.dir)?;
    }
    let run = Run {
        net,
        plan,
        config,
        fingerprint,
        done: AtomicU64::new(0),
        report_every: (total / 16).max(1),
        total,
        start: Instant::now(),
    };
    let (tensor, macs) = parallel::with_workers(config.workers, || run.reduce(0, total))?;
    let telemetry = Telemetry {
        slices: n_slices,
        macs,
        seconds: run.start.elapsed().as_secs_f64(),
    };
    log::info!(
        "{} slices, {:.3e} flops in {:.3} s ({:.3e} flop/s)",
        n_slices,
        telemetry.flops() as f64,
        telemetry.seconds,
        telemetry.flops_per_second()
    );
    Ok(Execution { tensor, telemetry })
}

/// Amplitude of a closed network.
pub fn scalar(exec: &Execution) -> Option<Complex32> {
    exec.tensor.scalar_value()
}
