//! Plan file.
//!
//! ```text
//! maxsize <log2>
//! slices <label>,<label>,...
//! contract <idA> <idB> -> <idC>
//! ...
//! ```
//!
//! `slices` may be empty. Contractions are listed in postorder; ids below the
//! first produced id are network node ids, every `idC` is fresh and numbered
//! consecutively from one past the largest network node id.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use super::{ContractionTree, OrderError, SlicePlan, TreeNode};
use crate::tensor::Label;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PlanFile {
    pub max_size_log2: usize,
    pub slices: SlicePlan,
    pub tree: ContractionTree,
}

pub fn serialize_plan(plan: &PlanFile) -> String {
    let tree = plan.tree.compact();
    let leaves = tree.leaves();
    let mut next = leaves.iter().max().map_or(0, |m| m + 1);
    let mut ids = vec![0usize; tree.nodes().len()];
    let mut s = String::new();
    let _ = writeln!(s, "maxsize {}", plan.max_size_log2);
    let labels: Vec<String> = plan.slices.labels.iter().map(|l| l.to_string()).collect();
    if labels.is_empty() {
        s.push_str("slices\n");
    } else {
        let _ = writeln!(s, "slices {}", labels.join(","));
    }
    for (i, node) in tree.nodes().iter().enumerate() {
        match *node {
            TreeNode::Leaf(id) => ids[i] = id,
            TreeNode::Internal(l, r) => {
                ids[i] = next;
                next += 1;
                let _ = writeln!(s, "contract {} {} -> {}", ids[l], ids[r], ids[i]);
            }
        }
    }
    if tree.nodes().len() == 1 {
        // a single node needs no contraction; record it as its own root
        let _ = writeln!(s, "root {}", ids[0]);
    }
    s
}

pub fn parse_plan(text: &str) -> Result<PlanFile, OrderError> {
    let err = |line: usize, m: &str| OrderError::Parse {
        line,
        message: m.to_string(),
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (i, first) = lines.next().ok_or_else(|| err(1, "empty plan"))?;
    let max_size_log2 = first
        .trim()
        .strip_prefix("maxsize ")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| err(i + 1, "expected `maxsize <log2>`"))?;
    let (i, second) = lines
        .next()
        .ok_or_else(|| err(2, "missing `slices` line"))?;
    let rest = second
        .trim()
        .strip_prefix("slices")
        .ok_or_else(|| err(i + 1, "expected `slices <labels>`"))?;
    let mut labels = Vec::new();
    for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let l = Label(tok.parse().map_err(|_| err(i + 1, "bad label"))?);
        if labels.contains(&l) {
            return Err(err(i + 1, "label sliced twice"));
        }
        labels.push(l);
    }

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut index: HashMap<usize, usize> = HashMap::new();
    let mut produced = BTreeSet::new();
    let mut consumed = BTreeSet::new();
    let mut root = None;
    for (i, line) in lines {
        let toks: Vec<&str> = line.split_whitespace().collect();
        match toks.as_slice() {
            ["contract", a, b, "->", c] => {
                let parse = |t: &str| t.parse::<usize>().map_err(|_| err(i + 1, "bad node id"));
                let (a, b, c) = (parse(a)?, parse(b)?, parse(c)?);
                let mut operand = |id: usize| -> Result<usize, OrderError> {
                    if !consumed.insert(id) {
                        return Err(err(i + 1, "node used twice"));
                    }
                    Ok(*index.entry(id).or_insert_with(|| {
                        nodes.push(TreeNode::Leaf(id));
                        nodes.len() - 1
                    }))
                };
                let (l, r) = (operand(a)?, operand(b)?);
                if index.contains_key(&c) || !produced.insert(c) {
                    return Err(err(i + 1, "result id already in use"));
                }
                nodes.push(TreeNode::Internal(l, r));
                index.insert(c, nodes.len() - 1);
                root = Some(nodes.len() - 1);
            }
            ["root", a] if nodes.is_empty() => {
                let id = a.parse::<usize>().map_err(|_| err(i + 1, "bad node id"))?;
                nodes.push(TreeNode::Leaf(id));
                root = Some(0);
            }
            _ => return Err(err(i + 1, "expected `contract <a> <b> -> <c>`")),
        }
    }
    let root = root.ok_or_else(|| err(text.lines().count(), "plan has no contractions"))?;
    let tree = ContractionTree::new(nodes, root)?;
    if tree.postorder().len() != tree.nodes().len() {
        return Err(err(
            text.lines().count(),
            "contractions do not form a single tree",
        ));
    }
    Ok(PlanFile {
        max_size_log2,
        slices: SlicePlan { labels },
        tree,
    })
}
