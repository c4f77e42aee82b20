//! Tensor networks built from circuits, and their simplification.
//!
//! Every wire segment of the circuit is one binary label. A network holds its
//! nodes by id and tracks, for every label, the one or two nodes carrying it.
//! Labels carried by one node only are the open legs, listed in open-qubit
//! order.
//!
//! Two nodes may share several labels (for instance two fSim gates acting on
//! the same pair of qubits back to back). Those parallel legs stay separate
//! binary labels; the rank of a node is always the number of its labels, so
//! rank accounting equals the log2 of the stored size.
//!
//! # Einsum export
//!
//! [`TensorNetwork::to_einsum`] writes one line per node, `<id>: <l>,<l>,...`
//! (labels in index order, empty for a scalar), followed by a final line
//! `-> <l>,<l>,...` listing the open labels. [`parse_einsum`] reads it back.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex32;
use thiserror::Error;

use crate::circuit::{fsim, Circuit, GateMatrix, Layer};
use crate::tensor::{
    contract_fused, contract_naive, KernelConfig, Label, Tensor, TensorError, MAX_RANK,
};

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("expected {expected} output bits, got {got}")]
    BitstringLength { expected: usize, got: usize },
    #[error("output bits must be 0 or 1, got {0}")]
    BadBit(u8),
    #[error("open qubit {0} is out of range or repeated")]
    BadOpenQubit(usize),
    #[error("invalid network: {0}")]
    Invalid(String),
    #[error("no node with id {0}")]
    MissingNode(usize),
    #[error("einsum line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorNetwork {
    nodes: BTreeMap<usize, Tensor>,
    edges: BTreeMap<Label, Vec<usize>>,
    open: Vec<Label>,
    next_id: usize,
}

impl TensorNetwork {
    /// Network with node ids `0..tensors.len()`.
    pub fn from_tensors(tensors: Vec<Tensor>, open: Vec<Label>) -> Result<Self, NetworkError> {
        let mut net = Self {
            nodes: BTreeMap::new(),
            edges: BTreeMap::new(),
            open,
            next_id: 0,
        };
        for t in tensors {
            net.insert(t);
        }
        net.validate()?;
        Ok(net)
    }

    fn insert(&mut self, t: Tensor) -> usize {
        let id = self.next_id;
        self.next_id += 1;
        self.put(id, t);
        id
    }

    fn put(&mut self, id: usize, t: Tensor) {
        for l in t.labels() {
            self.edges.entry(*l).or_default().push(id);
        }
        self.nodes.insert(id, t);
    }

    fn take(&mut self, id: usize) -> Result<Tensor, NetworkError> {
        let t = self
            .nodes
            .remove(&id)
            .ok_or(NetworkError::MissingNode(id))?;
        for l in t.labels() {
            let ends = self.edges.get_mut(l).expect("edge of node");
            ends.retain(|&n| n != id);
            if ends.is_empty() {
                self.edges.remove(l);
            }
        }
        Ok(t)
    }

    /// Checks that every label sits on at most two nodes and that exactly the
    /// open labels sit on one.
    pub fn validate(&self) -> Result<(), NetworkError> {
        for (l, ends) in &self.edges {
            let open = self.open.contains(l);
            match (ends.len(), open) {
                (1, true) | (2, false) => {}
                (1, false) => {
                    return Err(NetworkError::Invalid(format!(
                        "label {l} is dangling but not open"
                    )))
                }
                (2, true) => {
                    return Err(NetworkError::Invalid(format!(
                        "open label {l} is carried by two nodes"
                    )))
                }
                (n, _) => {
                    return Err(NetworkError::Invalid(format!(
                        "label {l} is carried by {n} nodes"
                    )))
                }
            }
        }
        for (i, l) in self.open.iter().enumerate() {
            if self.open[..i].contains(l) || !self.edges.contains_key(l) {
                return Err(NetworkError::Invalid(format!(
                    "open label {l} is missing or repeated"
                )));
            }
        }
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.keys().copied()
    }

    pub fn node(&self, id: usize) -> Option<&Tensor> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, &Tensor)> {
        self.nodes.iter().map(|(id, t)| (*id, t))
    }

    pub fn open_labels(&self) -> &[Label] {
        &self.open
    }

    /// Nodes carrying `label`.
    pub fn endpoints(&self, label: Label) -> &[usize] {
        self.edges.get(&label).map(|v| v.as_slice()).unwrap_or(&[])
    }

    /// Labels carried by two nodes.
    pub fn closed_labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.edges
            .iter()
            .filter(|(_, e)| e.len() == 2)
            .map(|(l, _)| *l)
    }

    /// Distinct neighbours of `id`, ascending.
    pub fn neighbors(&self, id: usize) -> Vec<usize> {
        let mut out: Vec<usize> = match self.nodes.get(&id) {
            Some(t) => t
                .labels()
                .iter()
                .flat_map(|l| self.endpoints(*l))
                .copied()
                .filter(|&n| n != id)
                .collect(),
            None => Vec::new(),
        };
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether the closed-label graph connects every node.
    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Connected components of the closed-label graph, each sorted, ordered
    /// by smallest id.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = BTreeMap::new();
        let mut out = Vec::new();
        for id in self.node_ids() {
            if seen.contains_key(&id) {
                continue;
            }
            let mut comp = vec![id];
            seen.insert(id, ());
            let mut i = 0;
            while i < comp.len() {
                for n in self.neighbors(comp[i]) {
                    if seen.insert(n, ()).is_none() {
                        comp.push(n);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Contracts node `from` into node `into`; the result keeps id `into`
    /// with labels `(into-only, from-only)`.
    pub fn merge(&mut self, into: usize, from: usize) -> Result<(), NetworkError> {
        if into == from || !self.nodes.contains_key(&into) {
            return Err(NetworkError::MissingNode(into));
        }
        let b = self.take(from)?;
        let a = self.take(into)?;
        let c = contract_fused(&a, &b, &KernelConfig::default())?;
        self.put(into, c);
        Ok(())
    }

    /// Rank of the tensor obtained by contracting nodes `a` and `b`.
    pub fn merged_rank(&self, a: usize, b: usize) -> usize {
        let (ta, tb) = (&self.nodes[&a], &self.nodes[&b]);
        let shared = ta
            .labels()
            .iter()
            .filter(|l| tb.labels().contains(l))
            .count();
        ta.rank() + tb.rank() - 2 * shared
    }

    fn shared_count(&self, a: usize, b: usize) -> usize {
        let tb = &self.nodes[&b];
        self.nodes[&a]
            .labels()
            .iter()
            .filter(|l| tb.labels().contains(l))
            .count()
    }

    /// Contracts the whole network greedily (smallest result first) and
    /// returns a tensor over the open labels in open order.
    ///
    /// Meant as a reference for small networks; it uses the naive kernel.
    pub fn contract_all(&self) -> Result<Tensor, NetworkError> {
        let mut net = self.clone();
        while net.n_nodes() > 1 {
            let mut best: Option<(usize, usize, usize)> = None;
            for l in net.closed_labels() {
                let e = net.endpoints(l);
                let (a, b) = (e[0].min(e[1]), e[0].max(e[1]));
                let key = (net.merged_rank(a, b), a, b);
                if best.is_none_or(|k| key < k) {
                    best = Some(key);
                }
            }
            let (a, b) = match best {
                Some((_, a, b)) => (a, b),
                None => {
                    let mut ids = net.node_ids();
                    (ids.next().unwrap(), ids.next().unwrap())
                }
            };
            let tb = net.take(b)?;
            let ta = net.take(a)?;
            net.put(a, contract_naive(&ta, &tb, MAX_RANK)?);
        }
        let last = net
            .nodes
            .into_values()
            .next()
            .unwrap_or_else(|| Tensor::scalar(Complex32::new(1.0, 0.0)));
        Ok(last.permute(&self.open)?)
    }

    pub fn to_einsum(&self) -> String {
        let join = |ls: &[Label]| {
            ls.iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        for (id, t) in &self.nodes {
            let _ = writeln!(s, "{id}: {}", join(t.labels()));
        }
        let _ = writeln!(s, "-> {}", join(&self.open));
        s
    }
}

/// Parses the einsum export into `(node id, labels)` pairs and open labels.
#[allow(clippy::type_complexity)]
pub fn parse_einsum(text: &str) -> Result<(Vec<(usize, Vec<Label>)>, Vec<Label>), NetworkError> {
    let err = |line: usize, message: &str| NetworkError::Parse {
        line,
        message: message.to_string(),
    };
    let labels = |s: &str, line: usize| -> Result<Vec<Label>, NetworkError> {
        s.split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.parse().map(Label).map_err(|_| err(line, "bad label")))
            .collect()
    };
    let mut nodes = Vec::new();
    let mut open = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if open.is_some() {
            return Err(err(i + 1, "content after the open-label line"));
        }
        if let Some(rest) = line.strip_prefix("->") {
            open = Some(labels(rest, i + 1)?);
        } else {
            let (id, rest) = line
                .split_once(':')
                .ok_or_else(|| err(i + 1, "expected `<id>: <labels>`"))?;
            let id = id.trim().parse().map_err(|_| err(i + 1, "bad node id"))?;
            nodes.push((id, labels(rest, i + 1)?));
        }
    }
    Ok((
        nodes,
        open.ok_or_else(|| err(text.lines().count(), "missing `->` line"))?,
    ))
}

fn gate_tensor(m: &GateMatrix, labels: Vec<Label>) -> Tensor {
    let data = m
        .entries()
        .iter()
        .map(|z| Complex32::new(z.re as f32, z.im as f32))
        .collect();
    Tensor::new(labels, data).expect("gate shape")
}

/// Builds the amplitude network of `circuit`.
///
/// Qubits start in `|0>`. `output_bits` assigns the closed qubits in
/// increasing order; qubits in `open_qubits` keep a dangling output leg, and
/// the open labels follow the order of `open_qubits`. Node ids are assigned
/// in construction order: inputs, gates layer by layer, closed outputs.
pub fn circuit_to_network(
    circuit: &Circuit,
    output_bits: &[u8],
    open_qubits: &[usize],
) -> Result<TensorNetwork, NetworkError> {
    let n = circuit.n_qubits();
    for (i, &q) in open_qubits.iter().enumerate() {
        if q >= n || open_qubits[..i].contains(&q) {
            return Err(NetworkError::BadOpenQubit(q));
        }
    }
    if output_bits.len() + open_qubits.len() != n {
        return Err(NetworkError::BitstringLength {
            expected: n - open_qubits.len(),
            got: output_bits.len(),
        });
    }
    if let Some(&b) = output_bits.iter().find(|&&b| b > 1) {
        return Err(NetworkError::BadBit(b));
    }
    let one = Complex32::new(1.0, 0.0);
    let zero = Complex32::new(0.0, 0.0);
    let mut net = TensorNetwork {
        nodes: BTreeMap::new(),
        edges: BTreeMap::new(),
        open: Vec::new(),
        next_id: 0,
    };
    let mut wire: Vec<Label> = (0..n as u32).map(Label).collect();
    let mut next_label = n as u32;
    let mut fresh = || {
        next_label += 1;
        Label(next_label - 1)
    };
    for &l in &wire {
        net.insert(Tensor::new(vec![l], vec![one, zero])?);
    }
    for layer in circuit.layers() {
        match layer {
            Layer::Single(gates) => {
                for &(q, kind) in gates {
                    let out = fresh();
                    net.insert(gate_tensor(&kind.matrix(), vec![out, wire[q]]));
                    wire[q] = out;
                }
            }
            Layer::Two { gates, .. } => {
                for g in gates {
                    let (ao, bo) = (fresh(), fresh());
                    net.insert(gate_tensor(
                        &fsim(&g.params),
                        vec![ao, bo, wire[g.a], wire[g.b]],
                    ));
                    wire[g.a] = ao;
                    wire[g.b] = bo;
                }
            }
        }
    }
    let mut bits = output_bits.iter();
    for (q, &l) in wire.iter().enumerate() {
        if !open_qubits.contains(&q) {
            let v = if *bits.next().unwrap() == 0 {
                vec![one, zero]
            } else {
                vec![zero, one]
            };
            net.insert(Tensor::new(vec![l], v)?);
        }
    }
    net.open = open_qubits.iter().map(|&q| wire[q]).collect();
    Ok(net)
}

/// Sequence of `(into, from)` merges performed by [`simplify`].
///
/// Networks built from the same circuit and open-qubit set have identical
/// structure for every output bitstring, so the trace can be replayed on them
/// without searching again.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimplifyTrace {
    pub merges: Vec<(usize, usize)>,
}

impl SimplifyTrace {
    pub fn replay(&self, mut net: TensorNetwork) -> Result<TensorNetwork, NetworkError> {
        for &(into, from) in &self.merges {
            net.merge(into, from)?;
        }
        Ok(net)
    }
}

/// Absorbs low-rank nodes and pre-contracts rank-nonincreasing pairs until
/// nothing changes.
pub fn simplify(net: TensorNetwork) -> Result<TensorNetwork, NetworkError> {
    simplify_traced(net).map(|(n, _)| n)
}

pub fn simplify_traced(
    mut net: TensorNetwork,
) -> Result<(TensorNetwork, SimplifyTrace), NetworkError> {
    let mut trace = SimplifyTrace::default();
    loop {
        let step = next_absorption(&net).or_else(|| next_precontraction(&net));
        match step {
            Some((into, from)) => {
                net.merge(into, from)?;
                trace.merges.push((into, from));
            }
            None => return Ok((net, trace)),
        }
    }
}

/// Lowest-rank node of rank <= 2 (smallest id on ties) that can be absorbed,
/// paired with the neighbour sharing most labels, then of highest rank, then
/// of smallest id. Scalars merge into the smallest other node.
fn next_absorption(net: &TensorNetwork) -> Option<(usize, usize)> {
    let mut small: Vec<(usize, usize)> = net
        .nodes()
        .filter(|(_, t)| t.rank() <= 2)
        .map(|(id, t)| (t.rank(), id))
        .collect();
    small.sort_unstable();
    for (rank, id) in small {
        if rank == 0 {
            if let Some(other) = net.node_ids().find(|&o| o != id) {
                return Some((other, id));
            }
            continue;
        }
        let best = net.neighbors(id).into_iter().max_by_key(|&nb| {
            (
                net.shared_count(id, nb),
                net.nodes[&nb].rank(),
                std::cmp::Reverse(nb),
            )
        });
        if let Some(nb) = best {
            return Some((nb, id));
        }
    }
    None
}

/// Adjacent pair, both of rank > 2, whose contraction has rank at most the
/// larger of the two; smallest result rank first, then smallest ids.
fn next_precontraction(net: &TensorNetwork) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, usize)> = None;
    for l in net.closed_labels() {
        let e = net.endpoints(l);
        let (a, b) = (e[0].min(e[1]), e[0].max(e[1]));
        let (ra, rb) = (net.nodes[&a].rank(), net.nodes[&b].rank());
        if ra <= 2 || rb <= 2 {
            continue;
        }
        let r = net.merged_rank(a, b);
        if r <= ra.max(rb) && best.is_none_or(|k| (r, a, b) < k) {
            best = Some((r, a, b));
        }
    }
    best.map(|(_, a, b)| (a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin_topology, generate_rqc, GateKind, GenerateOptions};

    fn rqc(topology: &str, cycles: usize, seed: u64) -> Circuit {
        generate_rqc(
            &builtin_topology(topology).unwrap(),
            cycles,
            seed,
            &GenerateOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn single_sqrt_x_amplitude() {
        let c = Circuit::new(1, 0, vec![Layer::Single(vec![(0, GateKind::SqrtX)])]).unwrap();
        let net = circuit_to_network(&c, &[0], &[]).unwrap();
        let amp = net.contract_all().unwrap().scalar_value().unwrap();
        assert!((amp.re - std::f32::consts::FRAC_1_SQRT_2).abs() < 1e-6 && amp.im.abs() < 1e-6);
    }

    #[test]
    fn empty_circuit_amplitudes() {
        let net = circuit_to_network(&Circuit::empty(4), &[0, 0, 0, 0], &[]).unwrap();
        assert_eq!(
            net.contract_all().unwrap().scalar_value(),
            Some(Complex32::new(1.0, 0.0))
        );
        let net = circuit_to_network(&Circuit::empty(4), &[0, 1, 0, 0], &[]).unwrap();
        assert_eq!(
            net.contract_all().unwrap().scalar_value(),
            Some(Complex32::new(0.0, 0.0))
        );
    }

    #[test]
    fn open_qubits_leave_one_leg_each() {
        let c = rqc("grid(4x3)", 6, 3);
        let net = circuit_to_network(&c, &[0; 10], &[5, 2]).unwrap();
        assert_eq!(net.open_labels().len(), 2);
        net.validate().unwrap();
        assert!(net.is_connected());
        let t = net.contract_all().unwrap();
        assert_eq!(t.rank(), 2);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let c = Circuit::empty(3);
        assert_eq!(
            circuit_to_network(&c, &[0, 1], &[]),
            Err(NetworkError::BitstringLength {
                expected: 3,
                got: 2
            })
        );
        assert_eq!(
            circuit_to_network(&c, &[0, 2, 0], &[]),
            Err(NetworkError::BadBit(2))
        );
        assert_eq!(
            circuit_to_network(&c, &[0], &[1, 1]),
            Err(NetworkError::BadOpenQubit(1))
        );
        assert_eq!(
            circuit_to_network(&c, &[0, 0], &[3]),
            Err(NetworkError::BadOpenQubit(3))
        );
    }

    #[test]
    fn chain_of_single_qubit_gates_collapses() {
        let layers: Vec<Layer> = (0..5)
            .flat_map(|i| {
                let sq = Layer::Single(vec![(0, [GateKind::SqrtX, GateKind::SqrtY][i % 2])]);
                let tq = Layer::Two {
                    pattern: crate::circuit::Pattern::SEQUENCE[i % 8],
                    gates: vec![],
                };
                [sq, tq]
            })
            .take(9)
            .collect();
        let c = Circuit::new(1, 0, layers).unwrap();
        let net = circuit_to_network(&c, &[1], &[]).unwrap();
        let reference = net.contract_all().unwrap();
        let s = simplify(net).unwrap();
        assert_eq!(s.n_nodes(), 1);
        assert!(
            s.contract_all()
                .unwrap()
                .relative_distance(&reference)
                .unwrap()
                < 1e-6
        );
    }

    #[test]
    fn simplify_preserves_value_and_structure() {
        let c = rqc("grid(5x2)", 8, 12);
        let net = circuit_to_network(&c, &[1, 0, 1, 1, 0, 0, 1, 0, 1, 1], &[]).unwrap();
        let reference = net.contract_all().unwrap();
        let (s, trace) = simplify_traced(net.clone()).unwrap();
        s.validate().unwrap();
        assert!(
            s.contract_all()
                .unwrap()
                .relative_distance(&reference)
                .unwrap()
                < 1e-6
        );
        assert!(s.n_nodes() <= c.two_qubit_gate_count());
        for (id, t) in s.nodes() {
            assert!(
                t.rank() >= 3 || s.neighbors(id).is_empty(),
                "node {id} rank {}",
                t.rank()
            );
        }
        assert_eq!(trace.replay(net).unwrap(), s);
        let again = simplify(s.clone()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn trace_replays_for_other_bitstrings() {
        let c = rqc("grid(3x3)", 6, 5);
        let (_, trace) =
            simplify_traced(circuit_to_network(&c, &[0; 7], &[4, 8]).unwrap()).unwrap();
        let other = circuit_to_network(&c, &[1, 0, 1, 1, 0, 1, 1], &[4, 8]).unwrap();
        let reference = other.contract_all().unwrap();
        let replayed = trace.replay(other).unwrap();
        assert!(
            replayed
                .contract_all()
                .unwrap()
                .relative_distance(&reference)
                .unwrap()
                < 1e-6
        );
    }

    #[test]
    fn einsum_round_trip() {
        let c = rqc("grid(3x2)", 4, 1);
        let net = simplify(circuit_to_network(&c, &[0; 4], &[0, 5]).unwrap()).unwrap();
        let text = net.to_einsum();
        let (nodes, open) = parse_einsum(&text).unwrap();
        assert_eq!(open, net.open_labels());
        assert_eq!(nodes.len(), net.n_nodes());
        for (id, labels) in nodes {
            assert_eq!(net.node(id).unwrap().labels(), &labels[..]);
        }
        assert!(parse_einsum("0: 1,2\n").is_err());
        assert!(parse_einsum("x: 1\n-> \n").is_err());
    }

    #[test]
    fn validate_rejects_bad_label_use() {
        let one = |ls: &[u32]| {
            Tensor::from_fn(ls.iter().map(|&l| Label(l)).collect(), |_| {
                Complex32::new(1.0, 0.0)
            })
            .unwrap()
        };
        assert!(
            TensorNetwork::from_tensors(vec![one(&[0]), one(&[0]), one(&[0])], vec![]).is_err()
        );
        assert!(TensorNetwork::from_tensors(vec![one(&[0, 1]), one(&[0])], vec![]).is_err());
        assert!(TensorNetwork::from_tensors(vec![one(&[0, 1]), one(&[0])], vec![Label(1)]).is_ok());
    }
}
