//! Optimal contraction of a handful of items by dynamic programming over
//! subsets.

use fixedbitset::FixedBitSet;

use super::{ContractionTree, NetShape, OrderError, TreeNode};
use crate::network::TensorNetwork;

pub const EXHAUSTIVE_MAX_NODES: usize = 12;

/// Contraction structure over item indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Merge {
    Item(usize),
    Pair(Box<Merge>, Box<Merge>),
}

/// Cheapest way to contract `items` (label sets, sliced labels already
/// removed), in multiply-adds. Intermediates larger than `2^limit` are not
/// allowed. Returns `None` when no order fits or the items carry more than
/// 128 distinct labels.
///
/// Ties go to the split whose first part is numerically smallest, so the
/// result is deterministic.
pub(crate) fn optimal_merge(items: &[FixedBitSet], limit: Option<usize>) -> Option<(u128, Merge)> {
    let n = items.len();
    assert!((1..=16).contains(&n));
    let mut local = Vec::new();
    for s in items {
        for b in s.ones() {
            if !local.contains(&b) {
                local.push(b);
            }
        }
    }
    if local.len() > 128 {
        return None;
    }
    let masks: Vec<u128> = items
        .iter()
        .map(|s| {
            s.ones().fold(0u128, |m, b| {
                m | 1 << local.iter().position(|&x| x == b).unwrap()
            })
        })
        .collect();

    let full = (1usize << n) - 1;
    let mut labels = vec![0u128; full + 1];
    let mut best = vec![u128::MAX; full + 1];
    let mut split = vec![0usize; full + 1];
    for (i, m) in masks.iter().enumerate() {
        labels[1 << i] = *m;
        best[1 << i] = 0;
    }
    for mask in 1..=full {
        if mask.count_ones() < 2 {
            continue;
        }
        let low = mask & mask.wrapping_neg();
        labels[mask] = labels[low] ^ labels[mask ^ low];
        if limit.is_some_and(|lim| labels[mask].count_ones() as usize > lim) {
            continue;
        }
        let rest = mask ^ low;
        // parts containing the lowest item, excluding the whole mask
        let mut sub = rest;
        loop {
            let a = sub | low;
            if a != mask {
                let b = mask ^ a;
                if best[a] != u128::MAX && best[b] != u128::MAX {
                    let step = super::pow2((labels[a] | labels[b]).count_ones() as usize);
                    let c = best[a].saturating_add(best[b]).saturating_add(step);
                    if c < best[mask] || (c == best[mask] && a < split[mask]) {
                        best[mask] = c;
                        split[mask] = a;
                    }
                }
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    if best[full] == u128::MAX {
        return None;
    }
    fn build(mask: usize, split: &[usize]) -> Merge {
        if mask.count_ones() == 1 {
            return Merge::Item(mask.trailing_zeros() as usize);
        }
        let a = split[mask];
        Merge::Pair(Box::new(build(a, split)), Box::new(build(mask ^ a, split)))
    }
    Some((best[full], build(full, &split)))
}

/// Appends `merge` to `tree`, mapping item `i` to arena index `roots[i]`,
/// and returns the arena index of its root.
pub(crate) fn attach(tree: &mut ContractionTree, merge: &Merge, roots: &[usize]) -> usize {
    match merge {
        Merge::Item(i) => roots[*i],
        Merge::Pair(a, b) => {
            let l = attach(tree, a, roots);
            let r = attach(tree, b, roots);
            tree.push(TreeNode::Internal(l, r))
        }
    }
}

/// Tree over `ids` built from a merge structure.
pub(crate) fn tree_from_merge(ids: &[usize], merge: &Merge) -> ContractionTree {
    fn go(ids: &[usize], m: &Merge) -> ContractionTree {
        match m {
            Merge::Item(i) => ContractionTree::leaf(ids[*i]),
            Merge::Pair(a, b) => ContractionTree::join(go(ids, a), go(ids, b)),
        }
    }
    go(ids, merge)
}

/// Repeatedly contracts the pair with the smallest result; used when the
/// subset search cannot run.
pub(crate) fn greedy_merge(items: &[FixedBitSet]) -> Merge {
    let mut live: Vec<(FixedBitSet, Merge)> = items
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), Merge::Item(i)))
        .collect();
    while live.len() > 1 {
        let mut best = (usize::MAX, 0, 1);
        for i in 0..live.len() {
            for j in i + 1..live.len() {
                let size = live[i].0.symmetric_difference_count(&live[j].0);
                let connected = !live[i].0.is_disjoint(&live[j].0);
                let key = if connected { size } else { size + 1_000 };
                if key < best.0 {
                    best = (key, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let (sj, mj) = live.remove(j);
        let (si, mi) = live.remove(i);
        let mut s = si;
        s.symmetric_difference_with(&sj);
        live.insert(i, (s, Merge::Pair(Box::new(mi), Box::new(mj))));
    }
    live.pop().unwrap().1
}

/// Flops-optimal contraction tree of a network with at most
/// [`EXHAUSTIVE_MAX_NODES`] nodes.
pub fn exhaustive_order(net: &TensorNetwork) -> Result<ContractionTree, OrderError> {
    let shape = NetShape::new(net);
    let n = shape.n_nodes();
    if n == 0 {
        return Err(OrderError::EmptyNetwork);
    }
    if n > EXHAUSTIVE_MAX_NODES {
        return Err(OrderError::TooManyNodes {
            n,
            max: EXHAUSTIVE_MAX_NODES,
        });
    }
    let items: Vec<FixedBitSet> = shape
        .ids()
        .iter()
        .map(|&id| shape.leaf_set(id).clone())
        .collect();
    let merge = match optimal_merge(&items, None) {
        Some((_, m)) => m,
        None => {
            return Err(OrderError::InvalidTree(
                "more than 128 labels in an exhaustive search".into(),
            ))
        }
    };
    Ok(tree_from_merge(shape.ids(), &merge))
}

#[cfg(test)]
mod tests {
    use super::super::test_nets::net;
    use super::super::{cost, SlicePlan};
    use super::*;
    use crate::rng::CounterRng;
    use rand::RngCore;

    #[test]
    fn two_nodes_unique_tree() {
        let n = net(&[&[0, 1], &[1, 2]]);
        let t = exhaustive_order(&n).unwrap();
        assert_eq!(t.leaves(), vec![0, 1]);
    }

    #[test]
    fn three_chain_picks_cheaper_order() {
        // A[0,1] B[1,2,3,4] C[4,5,6,7]
        let n = net(&[&[0, 1], &[1, 2, 3, 4], &[4, 5, 6, 7]]);
        let t = exhaustive_order(&n).unwrap();
        let best = cost(&n, &t, &SlicePlan::default()).unwrap().flops;
        let trees = [
            ContractionTree::join(
                ContractionTree::join(ContractionTree::leaf(0), ContractionTree::leaf(1)),
                ContractionTree::leaf(2),
            ),
            ContractionTree::join(
                ContractionTree::join(ContractionTree::leaf(1), ContractionTree::leaf(2)),
                ContractionTree::leaf(0),
            ),
            ContractionTree::join(
                ContractionTree::join(ContractionTree::leaf(0), ContractionTree::leaf(2)),
                ContractionTree::leaf(1),
            ),
        ];
        let costs: Vec<u128> = trees
            .iter()
            .map(|t| cost(&n, t, &SlicePlan::default()).unwrap().flops)
            .collect();
        assert_eq!(best, *costs.iter().min().unwrap());
        assert_eq!(costs, vec![8 * (32 + 128), 8 * (128 + 128), 8 * (64 + 256)]);
    }

    #[test]
    fn limit_excludes_large_intermediates() {
        let items: Vec<FixedBitSet> = [[0usize, 1], [1, 2], [2, 3]]
            .iter()
            .map(|ls| {
                let mut s = FixedBitSet::with_capacity(8);
                ls.iter().for_each(|&l| s.insert(l));
                s
            })
            .collect();
        assert!(optimal_merge(&items, Some(2)).is_some());
        assert!(optimal_merge(&items, Some(1)).is_none());
    }

    fn random_tree(ids: &[usize], rng: &mut CounterRng) -> ContractionTree {
        let mut parts: Vec<ContractionTree> =
            ids.iter().map(|&i| ContractionTree::leaf(i)).collect();
        while parts.len() > 1 {
            let i = (rng.next_u64() % parts.len() as u64) as usize;
            let a = parts.swap_remove(i);
            let j = (rng.next_u64() % parts.len() as u64) as usize;
            let b = parts.swap_remove(j);
            parts.push(ContractionTree::join(a, b));
        }
        parts.pop().unwrap()
    }

    #[test]
    fn beats_random_tree_sampling() {
        // 8-node ring with chords
        let n = net(&[
            &[0, 1, 20],
            &[1, 2, 8],
            &[2, 3, 21],
            &[3, 4, 9, 8],
            &[4, 5, 22],
            &[5, 6, 9],
            &[6, 7, 23, 10],
            &[7, 0, 10],
        ]);
        let t = exhaustive_order(&n).unwrap();
        let best = cost(&n, &t, &SlicePlan::default()).unwrap().flops;
        let mut rng = CounterRng::new(77);
        let ids: Vec<usize> = n.node_ids().collect();
        let sampled = (0..10_000)
            .map(|_| {
                cost(&n, &random_tree(&ids, &mut rng), &SlicePlan::default())
                    .unwrap()
                    .flops
            })
            .min()
            .unwrap();
        assert!(best <= sampled);
    }

    #[test]
    fn too_many_nodes() {
        let labels: Vec<Vec<u32>> = (0..13).map(|i| vec![i, i + 1]).collect();
        let refs: Vec<&[u32]> = labels.iter().map(|v| v.as_slice()).collect();
        assert_eq!(
            exhaustive_order(&net(&refs)),
            Err(OrderError::TooManyNodes { n: 13, max: 12 })
        );
    }
}
