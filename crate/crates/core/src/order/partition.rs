//! Recursive balanced bisection with Fiduccia-Mattheyses refinement.

use fixedbitset::FixedBitSet;
use rand::RngCore;

use super::exhaustive::{attach, greedy_merge, optimal_merge};
use super::{ContractionTree, NetShape, OrderError, TreeNode};
use crate::network::TensorNetwork;
use crate::rng::{derive_key, CounterRng};

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionParams {
    /// Allowed relative deviation of each side from half the part.
    pub imbalance: f64,
    /// Parts of at most this many nodes are ordered exhaustively.
    pub leaf_size: usize,
    pub seed: u64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        Self {
            imbalance: 0.1,
            leaf_size: 8,
            seed: 0,
        }
    }
}

const MAX_PASSES: usize = 8;

struct Graph {
    /// `(neighbour, shared label count)` per leaf index.
    adj: Vec<Vec<(usize, i64)>>,
}

impl Graph {
    fn new(shape: &NetShape) -> Self {
        let n = shape.n_nodes();
        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); shape.n_labels()];
        for (i, &id) in shape.ids().iter().enumerate() {
            for l in shape.leaf_set(id).ones() {
                owners[l].push(i);
            }
        }
        let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
        for o in owners.iter().filter(|o| o.len() == 2) {
            for (a, b) in [(o[0], o[1]), (o[1], o[0])] {
                match adj[a].iter_mut().find(|(x, _)| *x == b) {
                    Some((_, w)) => *w += 1,
                    None => adj[a].push((b, 1)),
                }
            }
        }
        for v in &mut adj {
            v.sort_unstable();
        }
        Self { adj }
    }

    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.adj.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut i = 0;
            while i < comp.len() {
                for &(u, _) in &self.adj[comp[i]] {
                    if !std::mem::replace(&mut seen[u], true) {
                        comp.push(u);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

struct Search<'a> {
    shape: &'a NetShape,
    graph: Graph,
    params: &'a PartitionParams,
    /// Side of each leaf during a bisection: 0, 1, or -1 when outside the part.
    side: Vec<i8>,
    tree: ContractionTree,
    leaf_nodes: Vec<usize>,
}

impl Search<'_> {
    fn build(&mut self, part: &[usize], path: u64) -> usize {
        if part.len() == 1 {
            return self.leaf_nodes[part[0]];
        }
        if part.len() <= self.params.leaf_size {
            let items: Vec<FixedBitSet> = part
                .iter()
                .map(|&i| self.shape.leaf_set(self.shape.ids()[i]).clone())
                .collect();
            let merge = optimal_merge(&items, None)
                .map(|(_, m)| m)
                .unwrap_or_else(|| greedy_merge(&items));
            let roots: Vec<usize> = part.iter().map(|&i| self.leaf_nodes[i]).collect();
            return attach(&mut self.tree, &merge, &roots);
        }
        let (a, b) = self.bisect(part, path);
        let l = self.build(&a, path.wrapping_mul(2));
        let r = self.build(&b, path.wrapping_mul(2) + 1);
        self.tree.push(TreeNode::Internal(l, r))
    }

    fn bisect(&mut self, part: &[usize], path: u64) -> (Vec<usize>, Vec<usize>) {
        let m = part.len();
        let half = m as f64 / 2.0;
        // at least one node of slack either way so single moves are possible
        let lo = ((half * (1.0 - self.params.imbalance)).ceil() as usize)
            .min(m / 2 - 1)
            .max(1);
        let hi = ((half * (1.0 + self.params.imbalance)).floor() as usize)
            .max(m.div_ceil(2) + 1)
            .min(m - 1);
        let mut rng = CounterRng::new(derive_key(
            self.params.seed,
            &[crate::rng::STREAM_PARTITION, path],
        ));

        // initial cut: grow side 0 breadth-first from random seeds
        for &v in part {
            self.side[v] = 1;
        }
        let target = m / 2;
        let mut grown = 0;
        let mut queue = std::collections::VecDeque::new();
        while grown < target {
            if queue.is_empty() {
                let free: Vec<usize> = part
                    .iter()
                    .copied()
                    .filter(|&v| self.side[v] == 1)
                    .collect();
                let s = free[(rng.next_u64() % free.len() as u64) as usize];
                self.side[s] = 0;
                grown += 1;
                queue.push_back(s);
                continue;
            }
            let v = queue.pop_front().unwrap();
            for &(u, _) in &self.graph.adj[v] {
                if grown < target && self.side[u] == 1 {
                    self.side[u] = 0;
                    grown += 1;
                    queue.push_back(u);
                }
            }
        }
        self.refine(part, lo, hi);

        let a: Vec<usize> = part
            .iter()
            .copied()
            .filter(|&v| self.side[v] == 0)
            .collect();
        let b: Vec<usize> = part
            .iter()
            .copied()
            .filter(|&v| self.side[v] == 1)
            .collect();
        for &v in part {
            self.side[v] = -1;
        }
        (a, b)
    }

    /// Fiduccia-Mattheyses passes keeping side 0 within `[lo, hi]` nodes.
    fn refine(&mut self, part: &[usize], lo: usize, hi: usize) {
        let gain_of = |side: &[i8], v: usize, adj: &[Vec<(usize, i64)>]| -> i64 {
            adj[v]
                .iter()
                .filter(|(u, _)| side[*u] >= 0)
                .map(|&(u, w)| if side[u] != side[v] { w } else { -w })
                .sum()
        };
        let local: std::collections::HashMap<usize, usize> =
            part.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        for _ in 0..MAX_PASSES {
            let mut gain: Vec<i64> = part
                .iter()
                .map(|&v| gain_of(&self.side, v, &self.graph.adj))
                .collect();
            let mut locked = vec![false; part.len()];
            let mut size0 = part.iter().filter(|&&v| self.side[v] == 0).count();
            let mut moves = Vec::new();
            let (mut total, mut best_total, mut best_len) = (0i64, 0i64, 0usize);
            loop {
                let mut pick: Option<usize> = None;
                for (i, &v) in part.iter().enumerate() {
                    if locked[i] {
                        continue;
                    }
                    let new0 = if self.side[v] == 0 {
                        size0 - 1
                    } else {
                        size0 + 1
                    };
                    if new0 < lo || new0 > hi {
                        continue;
                    }
                    if pick.is_none_or(|p| gain[i] > gain[p]) {
                        pick = Some(i);
                    }
                }
                let Some(i) = pick else { break };
                let v = part[i];
                let old = self.side[v];
                self.side[v] = 1 - old;
                size0 = if old == 0 { size0 - 1 } else { size0 + 1 };
                locked[i] = true;
                total += gain[i];
                gain[i] = -gain[i];
                for &(u, w) in &self.graph.adj[v] {
                    if let Some(&j) = local.get(&u) {
                        gain[j] += if self.side[u] == old { 2 * w } else { -2 * w };
                    }
                }
                moves.push(v);
                if total > best_total {
                    best_total = total;
                    best_len = moves.len();
                }
            }
            for &v in &moves[best_len..] {
                self.side[v] = 1 - self.side[v];
            }
            if best_total <= 0 {
                break;
            }
        }
    }
}

/// Contraction tree by recursive balanced bisection minimizing the number of
/// cut labels, with exhaustive ordering inside parts of at most
/// `leaf_size` nodes.
///
/// Disconnected components are ordered separately and joined at the end
/// (reported through `log`).
pub fn partition_search(
    net: &TensorNetwork,
    params: &PartitionParams,
) -> Result<ContractionTree, OrderError> {
    let shape = NetShape::new(net);
    partition_shape(&shape, params)
}

pub(crate) fn partition_shape(
    shape: &NetShape,
    params: &PartitionParams,
) -> Result<ContractionTree, OrderError> {
    let n = shape.n_nodes();
    if n == 0 {
        return Err(OrderError::EmptyNetwork);
    }
    let mut tree = ContractionTree::leaf(shape.ids()[0]);
    let mut leaf_nodes = vec![0];
    for &id in &shape.ids()[1..] {
        leaf_nodes.push(tree.push(TreeNode::Leaf(id)));
    }
    let graph = Graph::new(shape);
    let comps = graph.components();
    if comps.len() > 1 {
        log::warn!(
            "network has {} disconnected components; ordering them independently",
            comps.len()
        );
    }
    let mut search = Search {
        shape,
        graph,
        params,
        side: vec![-1; n],
        tree,
        leaf_nodes,
    };
    let mut root: Option<usize> = None;
    for (c, comp) in comps.iter().enumerate() {
        let r = search.build(comp, c as u64 + 1);
        root = Some(match root {
            None => r,
            Some(prev) => search.tree.push(TreeNode::Internal(prev, r)),
        });
    }
    let tree = ContractionTree::new(search.tree.nodes().to_vec(), root.unwrap())?;
    Ok(tree.compact())
}

#[cfg(test)]
mod tests {
    use super::super::test_nets::net;
    use super::super::{cost, exhaustive_order, SlicePlan};
    use super::*;

    #[test]
    fn path_graph_keeps_intermediates_small() {
        let n = net(&[&[0, 1], &[1, 2], &[2, 3], &[3, 4], &[4, 5], &[5, 6]]);
        for leaf_size in [2, 3, 8] {
            let params = PartitionParams {
                leaf_size,
                ..Default::default()
            };
            let t = partition_search(&n, &params).unwrap();
            t.validate(n.node_ids()).unwrap();
            let c = cost(&n, &t, &SlicePlan::default()).unwrap();
            assert!(c.max_intermediate_log2 <= 2, "{c:?}");
        }
    }

    #[test]
    fn grid_network_tree_is_valid_and_reasonable() {
        // 4x4 grid of rank-4 nodes with open boundary legs
        let mut labels: Vec<Vec<u32>> = vec![Vec::new(); 16];
        let mut next = 0;
        for r in 0..4 {
            for c in 0..4 {
                let v = r * 4 + c;
                if c < 3 {
                    labels[v].push(next);
                    labels[v + 1].push(next);
                    next += 1;
                }
                if r < 3 {
                    labels[v].push(next);
                    labels[v + 4].push(next);
                    next += 1;
                }
            }
        }
        let refs: Vec<&[u32]> = labels.iter().map(|v| v.as_slice()).collect();
        let n = net(&refs);
        let t = partition_search(
            &n,
            &PartitionParams {
                leaf_size: 4,
                ..Default::default()
            },
        )
        .unwrap();
        t.validate(n.node_ids()).unwrap();
        let c = cost(&n, &t, &SlicePlan::default()).unwrap();
        assert!(c.max_intermediate_log2 <= 8, "{c:?}");
    }

    #[test]
    fn disconnected_components_are_joined() {
        let n = net(&[&[0, 1], &[1, 2], &[5, 6], &[6, 7]]);
        let t = partition_search(
            &n,
            &PartitionParams {
                leaf_size: 1,
                ..Default::default()
            },
        )
        .unwrap();
        t.validate(n.node_ids()).unwrap();
    }

    #[test]
    fn deterministic_for_a_seed() {
        let n = net(&[
            &[0, 1, 9],
            &[1, 2, 10],
            &[2, 3, 9],
            &[3, 4, 10],
            &[4, 5],
            &[5, 0, 11],
            &[11, 12],
            &[12, 13],
        ]);
        let p = PartitionParams {
            leaf_size: 2,
            seed: 5,
            ..Default::default()
        };
        assert_eq!(
            partition_search(&n, &p).unwrap(),
            partition_search(&n, &p).unwrap()
        );
    }

    #[test]
    fn small_network_matches_exhaustive() {
        let n = net(&[&[0, 1], &[1, 2, 3], &[3, 4], &[2, 4, 5]]);
        let t = partition_search(&n, &PartitionParams::default()).unwrap();
        assert_eq!(t, exhaustive_order(&n).unwrap());
    }
}
