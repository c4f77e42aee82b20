//! Contraction order search under a memory bound.
//!
//! Ordering only looks at label structure; no tensor data is touched. The
//! pipeline is: recursive bisection with exhaustive search inside small parts
//! ([`partition_search`]), greedy slicing interleaved with brute-force
//! subtree reconfiguration ([`slice_and_reconfigure`]), and a multi-candidate
//! driver ([`find_order`]).
//!
//! Cost convention: a pairwise contraction whose operands carry the label
//! union `U` (sliced labels removed) performs `2^|U|` complex multiply-adds,
//! counted as `8 * 2^|U|` floating point operations.

mod exhaustive;
mod partition;
mod planfile;
mod search;
mod slicing;
mod tree;

use std::collections::HashMap;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkError, TensorNetwork};
use crate::tensor::Label;

pub use exhaustive::{exhaustive_order, EXHAUSTIVE_MAX_NODES};
pub use partition::{partition_search, PartitionParams};
pub use planfile::{parse_plan, serialize_plan, PlanFile};
pub use search::{find_order, Metric, OrderOptions};
pub use slicing::{slice_and_reconfigure, SliceParams};
pub use tree::{ContractionTree, TreeNode};

#[derive(Debug, Error, PartialEq)]
pub enum OrderError {
    #[error("invalid contraction tree: {0}")]
    InvalidTree(String),
    #[error("exhaustive search supports at most {max} nodes, got {n}")]
    TooManyNodes { n: usize, max: usize },
    #[error("memory bound 2^{bound} is below the {open} open labels, which cannot be sliced")]
    BoundTooSmall { bound: usize, open: usize },
    #[error("sliced label {0} is not a closed label of the network")]
    BadSliceLabel(Label),
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("plan line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// Labels fixed by slicing; slice `i` assigns bit `k - 1 - j` of `i` to
/// `labels[j]`, so the first label is the most significant.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SlicePlan {
    pub labels: Vec<Label>,
}

impl SlicePlan {
    pub fn n_slices(&self) -> u128 {
        1u128 << self.labels.len()
    }

    /// Values of the sliced labels for slice `index`.
    pub fn values(&self, index: u128) -> Vec<u8> {
        let k = self.labels.len();
        (0..k).map(|j| ((index >> (k - 1 - j)) & 1) as u8).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostSummary {
    /// Real floating point operations over all slices.
    pub flops: u128,
    pub n_slices: u128,
    /// log2 of the largest tensor (inputs included) in any slice.
    pub max_intermediate_log2: usize,
}

impl CostSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("cost summary serializes")
    }
}

/// Tree, slicing and their accounted cost.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContractionPlan {
    pub tree: ContractionTree,
    pub slices: SlicePlan,
    pub max_size_log2: usize,
    pub cost: CostSummary,
}

impl ContractionPlan {
    pub fn new(
        net: &TensorNetwork,
        tree: ContractionTree,
        slices: SlicePlan,
        max_size_log2: usize,
    ) -> Result<Self, OrderError> {
        let cost = cost(net, &tree, &slices)?;
        Ok(Self {
            tree: tree.compact(),
            slices,
            max_size_log2,
            cost,
        })
    }
}

/// Label structure of a network, indexed densely.
#[derive(Clone, Debug)]
pub struct NetShape {
    ids: Vec<usize>,
    leaf_sets: Vec<FixedBitSet>,
    labels: Vec<Label>,
    label_index: HashMap<Label, usize>,
    leaf_index: HashMap<usize, usize>,
    open: FixedBitSet,
}

impl NetShape {
    pub fn new(net: &TensorNetwork) -> Self {
        let mut labels: Vec<Label> = net
            .nodes()
            .flat_map(|(_, t)| t.labels().iter().copied())
            .collect();
        labels.sort_unstable();
        labels.dedup();
        let label_index: HashMap<Label, usize> =
            labels.iter().enumerate().map(|(i, l)| (*l, i)).collect();
        let n_labels = labels.len();
        let set_of = |ls: &[Label]| {
            let mut s = FixedBitSet::with_capacity(n_labels);
            for l in ls {
                s.insert(label_index[l]);
            }
            s
        };
        let ids: Vec<usize> = net.node_ids().collect();
        let leaf_sets = net.nodes().map(|(_, t)| set_of(t.labels())).collect();
        let leaf_index = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let open = set_of(net.open_labels());
        Self {
            ids,
            leaf_sets,
            labels,
            label_index,
            leaf_index,
            open,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn label(&self, index: usize) -> Label {
        self.labels[index]
    }

    pub fn label_index(&self, label: Label) -> Option<usize> {
        self.label_index.get(&label).copied()
    }

    pub fn leaf_set(&self, id: usize) -> &FixedBitSet {
        &self.leaf_sets[self.leaf_index[&id]]
    }

    pub fn open(&self) -> &FixedBitSet {
        &self.open
    }

    pub fn empty_set(&self) -> FixedBitSet {
        FixedBitSet::with_capacity(self.labels.len())
    }

    /// Dense mask of the sliced labels; errors on labels that are open or
    /// absent.
    pub fn slice_mask(&self, slices: &SlicePlan) -> Result<FixedBitSet, OrderError> {
        let mut mask = self.empty_set();
        for l in &slices.labels {
            match self.label_index(*l) {
                Some(i) if !self.open.contains(i) => mask.insert(i),
                _ => return Err(OrderError::BadSliceLabel(*l)),
            }
        }
        Ok(mask)
    }

    /// Label set of every arena entry (empty for unreachable ones).
    pub fn node_sets(&self, tree: &ContractionTree) -> Vec<FixedBitSet> {
        let mut sets = vec![FixedBitSet::new(); tree.nodes().len()];
        for i in tree.postorder() {
            sets[i] = match tree.nodes()[i] {
                TreeNode::Leaf(id) => self.leaf_set(id).clone(),
                TreeNode::Internal(l, r) => {
                    let mut s = sets[l].clone();
                    s.symmetric_difference_with(&sets[r]);
                    s
                }
            };
        }
        sets
    }

    pub fn cost(&self, tree: &ContractionTree, sliced: &FixedBitSet) -> CostSummary {
        let sets = self.node_sets(tree);
        self.cost_with_sets(tree, &sets, sliced)
    }

    pub(crate) fn cost_with_sets(
        &self,
        tree: &ContractionTree,
        sets: &[FixedBitSet],
        sliced: &FixedBitSet,
    ) -> CostSummary {
        let n_sliced = sliced.count_ones(..);
        let mut macs: u128 = 0;
        let mut max_log2 = 0;
        for i in tree.postorder() {
            max_log2 = max_log2.max(sets[i].difference_count(sliced));
            if let TreeNode::Internal(l, r) = tree.nodes()[i] {
                let u = union_minus_count(&sets[l], &sets[r], sliced);
                macs = macs.saturating_add(pow2(u));
            }
        }
        CostSummary {
            flops: macs.saturating_mul(8).saturating_mul(pow2(n_sliced)),
            n_slices: pow2(n_sliced),
            max_intermediate_log2: max_log2,
        }
    }
}

pub(crate) fn pow2(k: usize) -> u128 {
    if k >= 128 {
        u128::MAX
    } else {
        1u128 << k
    }
}

/// `|(a ∪ b) \ minus|` without allocating.
pub(crate) fn union_minus_count(a: &FixedBitSet, b: &FixedBitSet, minus: &FixedBitSet) -> usize {
    let (a, b, m) = (a.as_slice(), b.as_slice(), minus.as_slice());
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| {
            let w = a.get(i).copied().unwrap_or(0) | b.get(i).copied().unwrap_or(0);
            (w & !m.get(i).copied().unwrap_or(0)).count_ones() as usize
        })
        .sum()
}

/// Exact symbolic cost of contracting `net` along `tree` with `slices`.
pub fn cost(
    net: &TensorNetwork,
    tree: &ContractionTree,
    slices: &SlicePlan,
) -> Result<CostSummary, OrderError> {
    tree.validate(net.node_ids())?;
    let shape = NetShape::new(net);
    let sliced = shape.slice_mask(slices)?;
    Ok(shape.cost(tree, &sliced))
}
