//! Greedy slicing with subtree reconfiguration.

use fixedbitset::FixedBitSet;

use super::exhaustive::{attach, optimal_merge};
use super::{ContractionTree, NetShape, OrderError, SlicePlan, TreeNode};
use crate::network::TensorNetwork;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceParams {
    /// Largest number of subtrees re-optimized together.
    pub reconfigure_size: usize,
}

impl Default for SliceParams {
    fn default() -> Self {
        Self {
            reconfigure_size: 10,
        }
    }
}

/// Slices labels until every tensor fits in `2^max_size_log2` entries.
///
/// Each round slices the label of the largest tensor that gives the lowest
/// total flops (smallest label on ties), then re-optimizes small subtrees by
/// exhaustive search without letting any tensor grow. Neither step looks at
/// the bound, so the sequence of trees is the same for every bound and a
/// tighter bound never yields fewer slices.
pub fn slice_and_reconfigure(
    net: &TensorNetwork,
    tree: &ContractionTree,
    max_size_log2: usize,
    params: &SliceParams,
) -> Result<(ContractionTree, SlicePlan), OrderError> {
    tree.validate(net.node_ids())?;
    let shape = NetShape::new(net);
    slice_shape(&shape, tree, max_size_log2, params)
}

pub(crate) fn slice_shape(
    shape: &NetShape,
    tree: &ContractionTree,
    max_size_log2: usize,
    params: &SliceParams,
) -> Result<(ContractionTree, SlicePlan), OrderError> {
    let n_open = shape.open().count_ones(..);
    if max_size_log2 < n_open {
        return Err(OrderError::BoundTooSmall {
            bound: max_size_log2,
            open: n_open,
        });
    }
    let mut tree = tree.compact();
    let mut sliced = shape.empty_set();
    let mut order = Vec::new();
    reconfigure(shape, &mut tree, &sliced, params.reconfigure_size);
    loop {
        let sets = shape.node_sets(&tree);
        let Some(largest) = tree
            .postorder()
            .into_iter()
            .max_by_key(|&i| (sets[i].difference_count(&sliced), usize::MAX - i))
        else {
            break;
        };
        if sets[largest].difference_count(&sliced) <= max_size_log2 {
            break;
        }
        let mut best: Option<(u128, usize)> = None;
        for l in sets[largest].ones() {
            if sliced.contains(l) || shape.open().contains(l) {
                continue;
            }
            sliced.insert(l);
            let flops = shape.cost_with_sets(&tree, &sets, &sliced).flops;
            sliced.set(l, false);
            // dense label indices follow label order, so `l` breaks ties by label
            if best.is_none_or(|(f, _)| flops < f) {
                best = Some((flops, l));
            }
        }
        let Some((_, l)) = best else {
            return Err(OrderError::BoundTooSmall {
                bound: max_size_log2,
                open: n_open,
            });
        };
        sliced.insert(l);
        order.push(shape.label(l));
        reconfigure(shape, &mut tree, &sliced, params.reconfigure_size);
    }
    Ok((tree.compact(), SlicePlan { labels: order }))
}

/// Replaces subtrees of up to `k` items with their exhaustive optimum when
/// that lowers flops and keeps every tensor within the subtree's current
/// largest size. Visits the most expensive contractions first.
pub(crate) fn reconfigure(
    shape: &NetShape,
    tree: &mut ContractionTree,
    sliced: &FixedBitSet,
    k: usize,
) {
    if k < 3 {
        return;
    }
    let sets = shape.node_sets(tree);
    let mut internal: Vec<(usize, usize)> = tree
        .postorder()
        .into_iter()
        .filter_map(|i| match tree.nodes()[i] {
            TreeNode::Internal(l, r) => {
                Some((super::union_minus_count(&sets[l], &sets[r], sliced), i))
            }
            TreeNode::Leaf(_) => None,
        })
        .collect();
    internal.sort_unstable_by(|a, b| b.cmp(a));
    let budget = internal.len().min(internal.len() / 4 + 32);
    let reachable_of = |tree: &ContractionTree| {
        let mut r = vec![false; tree.nodes().len()];
        tree.postorder().into_iter().for_each(|i| r[i] = true);
        r
    };
    let mut sets = sets;
    let mut reachable = reachable_of(tree);
    let mut changed = false;
    for &(_, x) in &internal[..budget] {
        if changed {
            sets = shape.node_sets(tree);
            reachable = reachable_of(tree);
            changed = false;
        }
        if !reachable[x] {
            continue;
        }
        let size = |i: usize| sets[i].difference_count(sliced);
        // expand the frontier below x, largest item first
        let TreeNode::Internal(l, r) = tree.nodes()[x] else {
            continue;
        };
        let mut frontier = vec![l, r];
        let mut inner = vec![x];
        while frontier.len() < k {
            let pick = frontier
                .iter()
                .enumerate()
                .filter(|(_, &f)| matches!(tree.nodes()[f], TreeNode::Internal(..)))
                .max_by_key(|(_, &f)| (size(f), usize::MAX - f))
                .map(|(j, _)| j);
            let Some(j) = pick else { break };
            let f = frontier.remove(j);
            if let TreeNode::Internal(a, b) = tree.nodes()[f] {
                frontier.push(a);
                frontier.push(b);
                inner.push(f);
            }
        }
        if frontier.len() < 3 {
            continue;
        }
        let mut old_cost: u128 = 0;
        let mut old_max = 0;
        for &i in &inner {
            if let TreeNode::Internal(a, b) = tree.nodes()[i] {
                old_cost = old_cost.saturating_add(super::pow2(super::union_minus_count(
                    &sets[a], &sets[b], sliced,
                )));
            }
            old_max = old_max.max(size(i));
        }
        let items: Vec<FixedBitSet> = frontier
            .iter()
            .map(|&f| {
                let mut s = sets[f].clone();
                s.difference_with(sliced);
                s
            })
            .collect();
        let Some((new_cost, merge)) = optimal_merge(&items, Some(old_max)) else {
            continue;
        };
        if new_cost >= old_cost {
            continue;
        }
        let root = attach(tree, &merge, &frontier);
        let node = tree.nodes()[root];
        tree.set(x, node);
        changed = true;
    }
    *tree = tree.compact();
}

#[cfg(test)]
mod tests {
    use super::super::test_nets::net;
    use super::super::{cost, partition_search, PartitionParams};
    use super::*;

    fn ladder() -> TensorNetwork {
        // 2 x 6 ladder, each rung node rank 3-4
        let mut labels: Vec<Vec<u32>> = vec![Vec::new(); 12];
        let mut next = 0;
        for c in 0..6 {
            for r in 0..2 {
                let v = r * 6 + c;
                if c < 5 {
                    labels[v].push(next);
                    labels[v + 1].push(next);
                    next += 1;
                }
            }
            labels[c].push(next);
            labels[c + 6].push(next);
            next += 1;
        }
        let refs: Vec<&[u32]> = labels.iter().map(|v| v.as_slice()).collect();
        net(&refs)
    }

    #[test]
    fn under_bound_slices_nothing() {
        let n = ladder();
        let t = partition_search(&n, &PartitionParams::default()).unwrap();
        let before = cost(&n, &t, &SlicePlan::default()).unwrap();
        let (t2, plan) = slice_and_reconfigure(&n, &t, 30, &SliceParams::default()).unwrap();
        assert!(plan.labels.is_empty());
        assert!(cost(&n, &t2, &plan).unwrap().flops <= before.flops);
    }

    #[test]
    fn tighter_bounds_need_at_least_as_many_slices() {
        let n = ladder();
        let t = partition_search(
            &n,
            &PartitionParams {
                leaf_size: 3,
                ..Default::default()
            },
        )
        .unwrap();
        let mut prev = 0;
        for bound in (0..=6).rev() {
            let (t2, plan) = slice_and_reconfigure(&n, &t, bound, &SliceParams::default()).unwrap();
            let c = cost(&n, &t2, &plan).unwrap();
            assert!(c.max_intermediate_log2 <= bound);
            assert!(plan.labels.len() >= prev);
            prev = plan.labels.len();
        }
    }

    #[test]
    fn bound_below_open_legs_is_rejected() {
        let n = net(&[&[0, 1, 2], &[2, 3, 4]]);
        let t = partition_search(&n, &PartitionParams::default()).unwrap();
        assert_eq!(
            slice_and_reconfigure(&n, &t, 3, &SliceParams::default()),
            Err(OrderError::BoundTooSmall { bound: 3, open: 4 })
        );
        let (_, plan) = slice_and_reconfigure(&n, &t, 4, &SliceParams::default()).unwrap();
        assert!(plan.labels.is_empty());
    }

    #[test]
    fn reconfiguration_repairs_a_bad_tree() {
        let n = ladder();
        // left-deep tree in a poor leaf order
        let ids = [0usize, 11, 5, 6, 1, 10, 4, 7, 2, 9, 3, 8];
        let mut t = ContractionTree::leaf(ids[0]);
        for &i in &ids[1..] {
            t = ContractionTree::join(t, ContractionTree::leaf(i));
        }
        let before = cost(&n, &t, &SlicePlan::default()).unwrap();
        let (t2, plan) = slice_and_reconfigure(&n, &t, 30, &SliceParams::default()).unwrap();
        let after = cost(&n, &t2, &plan).unwrap();
        assert!(after.flops < before.flops);
        assert!(after.max_intermediate_log2 <= before.max_intermediate_log2);
        t2.validate(n.node_ids()).unwrap();
    }
}
