use std::collections::BTreeSet;

use super::OrderError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeNode {
    /// Network node id.
    Leaf(usize),
    /// Arena indices of the two operands.
    Internal(usize, usize),
}

/// Binary contraction tree stored as an arena.
///
/// Only nodes reachable from the root are meaningful; edits may leave
/// unreachable entries behind until [`ContractionTree::compact`] is called.
#[derive(Clone, Debug)]
pub struct ContractionTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

impl PartialEq for ContractionTree {
    fn eq(&self, other: &Self) -> bool {
        let (a, b) = (self.compact(), other.compact());
        a.nodes == b.nodes
    }
}

impl Eq for ContractionTree {}

impl ContractionTree {
    pub fn new(nodes: Vec<TreeNode>, root: usize) -> Result<Self, OrderError> {
        if root >= nodes.len() {
            return Err(OrderError::InvalidTree("root out of range".into()));
        }
        for n in &nodes {
            if let TreeNode::Internal(l, r) = n {
                if *l >= nodes.len() || *r >= nodes.len() {
                    return Err(OrderError::InvalidTree("child out of range".into()));
                }
            }
        }
        let t = Self { nodes, root };
        // rejects cycles and shared subtrees
        let mut seen = vec![false; t.nodes.len()];
        let mut stack = vec![t.root];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(OrderError::InvalidTree(format!("node {i} reached twice")));
            }
            if let TreeNode::Internal(l, r) = t.nodes[i] {
                stack.push(l);
                stack.push(r);
            }
        }
        Ok(t)
    }

    pub fn leaf(id: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf(id)],
            root: 0,
        }
    }

    /// Joins two trees under a new root.
    pub fn join(left: ContractionTree, right: ContractionTree) -> Self {
        let mut nodes = left.nodes;
        let offset = nodes.len();
        nodes.extend(right.nodes.into_iter().map(|n| match n {
            TreeNode::Leaf(id) => TreeNode::Leaf(id),
            TreeNode::Internal(l, r) => TreeNode::Internal(l + offset, r + offset),
        }));
        nodes.push(TreeNode::Internal(left.root, right.root + offset));
        let root = nodes.len() - 1;
        Self { nodes, root }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub(crate) fn push(&mut self, node: TreeNode) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    pub(crate) fn set(&mut self, index: usize, node: TreeNode) {
        self.nodes[index] = node;
    }

    /// Reachable arena indices, children before parents, left before right.
    pub fn postorder(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![(self.root, false)];
        while let Some((i, expanded)) = stack.pop() {
            match self.nodes[i] {
                TreeNode::Internal(l, r) if !expanded => {
                    stack.push((i, true));
                    stack.push((r, false));
                    stack.push((l, false));
                }
                _ => out.push(i),
            }
        }
        out
    }

    /// Network node ids in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        self.postorder()
            .into_iter()
            .filter_map(|i| match self.nodes[i] {
                TreeNode::Leaf(id) => Some(id),
                TreeNode::Internal(..) => None,
            })
            .collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().len()
    }

    /// Copy holding only reachable nodes, in postorder with the root last.
    pub fn compact(&self) -> Self {
        let order = self.postorder();
        let mut index = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::with_capacity(order.len());
        for i in order {
            index[i] = nodes.len();
            nodes.push(match self.nodes[i] {
                TreeNode::Leaf(id) => TreeNode::Leaf(id),
                TreeNode::Internal(l, r) => TreeNode::Internal(index[l], index[r]),
            });
        }
        let root = nodes.len() - 1;
        Self { nodes, root }
    }

    /// Checks that the leaves are exactly `ids`, each once.
    pub fn validate(&self, ids: impl IntoIterator<Item = usize>) -> Result<(), OrderError> {
        let expected: BTreeSet<usize> = ids.into_iter().collect();
        let leaves = self.leaves();
        let got: BTreeSet<usize> = leaves.iter().copied().collect();
        if got.len() != leaves.len() {
            return Err(OrderError::InvalidTree("a leaf appears twice".into()));
        }
        if got != expected {
            return Err(OrderError::InvalidTree(
                "leaves differ from the network nodes".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn join_and_compact() {
        let t = ContractionTree::join(
            ContractionTree::join(ContractionTree::leaf(3), ContractionTree::leaf(1)),
            ContractionTree::leaf(2),
        );
        assert_eq!(t.leaves(), vec![3, 1, 2]);
        let c = t.compact();
        assert_eq!(c.root(), 4);
        assert_eq!(c.nodes()[4], TreeNode::Internal(2, 3));
        assert_eq!(c, t);
        t.validate([1, 2, 3]).unwrap();
        assert!(t.validate([1, 2]).is_err());
    }

    #[test]
    fn rejects_malformed_arenas() {
        use TreeNode::*;
        assert!(ContractionTree::new(vec![Leaf(0), Internal(0, 0)], 1).is_err());
        assert!(ContractionTree::new(vec![Leaf(0), Internal(0, 5)], 1).is_err());
        assert!(ContractionTree::new(vec![Leaf(0)], 1).is_err());
        assert!(ContractionTree::new(vec![Leaf(0), Leaf(1), Internal(0, 1)], 2).is_ok());
    }
}
