//! Multi-candidate order search.

use std::time::Instant;

use super::partition::partition_shape;
use super::slicing::slice_shape;
use super::{ContractionPlan, NetShape, OrderError, PartitionParams, SliceParams};
use crate::network::TensorNetwork;
use crate::parallel;
use crate::rng::{derive_key, STREAM_PARTITION};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Metric {
    /// Modeled flops.
    #[default]
    Flops,
    /// Measured wall time of contracting slice 0.
    Benchmark,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderOptions {
    pub max_size_log2: usize,
    pub n_candidates: usize,
    pub seed: u64,
    pub imbalance: f64,
    pub leaf_size: usize,
    pub reconfigure_size: usize,
    pub metric: Metric,
}

impl Default for OrderOptions {
    fn default() -> Self {
        Self {
            max_size_log2: 28,
            n_candidates: 100,
            seed: 0,
            imbalance: 0.1,
            leaf_size: 8,
            reconfigure_size: 10,
            metric: Metric::Flops,
        }
    }
}

/// Runs the partition + slicing pipeline for `n_candidates` seeds and
/// returns the best plan; ties go to the lower candidate index.
///
/// Candidate `i` partitions with seed `derive_key(seed, [PARTITION, i])`.
pub fn find_order(
    net: &TensorNetwork,
    options: &OrderOptions,
) -> Result<ContractionPlan, OrderError> {
    let shape = NetShape::new(net);
    if shape.n_nodes() == 0 {
        return Err(OrderError::EmptyNetwork);
    }
    let indices: Vec<u64> = (0..options.n_candidates.max(1) as u64).collect();
    let candidates = parallel::map_collect(&indices, |&i| -> Result<ContractionPlan, OrderError> {
        let params = PartitionParams {
            imbalance: options.imbalance,
            leaf_size: options.leaf_size,
            seed: derive_key(options.seed, &[STREAM_PARTITION, i]),
        };
        let tree = partition_shape(&shape, &params)?;
        let slice_params = SliceParams {
            reconfigure_size: options.reconfigure_size,
        };
        let (tree, slices) = slice_shape(&shape, &tree, options.max_size_log2, &slice_params)?;
        let sliced = shape.slice_mask(&slices)?;
        let cost = shape.cost(&tree, &sliced);
        Ok(ContractionPlan {
            tree,
            slices,
            max_size_log2: options.max_size_log2,
            cost,
        })
    });
    let candidates = candidates.into_iter().collect::<Result<Vec<_>, _>>()?;
    let best = match options.metric {
        Metric::Flops => candidates
            .iter()
            .enumerate()
            .min_by_key(|(i, p)| (p.cost.flops, *i))
            .map(|(i, _)| i),
        Metric::Benchmark => {
            let mut times = Vec::with_capacity(candidates.len());
            for (i, plan) in candidates.iter().enumerate() {
                let start = Instant::now();
                crate::engine::contract_slice(
                    net,
                    plan,
                    0,
                    &crate::engine::EngineConfig::default(),
                )
                .map_err(|e| OrderError::InvalidTree(e.to_string()))?;
                let t = start.elapsed().as_secs_f64();
                log::debug!(
                    "candidate {i}: slice 0 in {t:.6} s, {} flops modeled",
                    plan.cost.flops
                );
                times.push((t, i));
            }
            times
                .into_iter()
                .min_by(|a, b| a.partial_cmp(b).unwrap())
                .map(|(_, i)| i)
        }
    };
    let best = best.expect("at least one candidate");
    log::info!(
        "picked candidate {best} of {}: {:.3e} flops, {} slices, largest tensor 2^{}",
        candidates.len(),
        candidates[best].cost.flops as f64,
        candidates[best].cost.n_slices,
        candidates[best].cost.max_intermediate_log2
    );
    Ok(candidates.into_iter().nth(best).unwrap())
}
