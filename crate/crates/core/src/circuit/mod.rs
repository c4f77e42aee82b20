//! Random quantum circuits: gate matrices, device topologies with ABCD coupler
//! patterns, seeded generation and the text formats for circuits and
//! topologies.

mod format;
mod gates;
mod topology;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::rng::{bounded, CounterRng, STREAM_GATES};

pub use format::{
    parse_circuit, parse_fsim_table, parse_topology, serialize_circuit, serialize_topology,
};
pub use gates::{fsim, single_qubit_gate, FsimParams, GateKind, GateMatrix};
pub use topology::{builtin_topology, Coupler, Pattern, QubitSite, Topology};

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("unknown gate token `{0}`")]
    UnknownGate(String),
    #[error("unknown pattern label `{0}`")]
    UnknownPattern(String),
    #[error("unknown topology `{0}`")]
    UnknownTopology(String),
    #[error("gate matrix of arity {arity} cannot have {len} entries")]
    BadMatrixShape { arity: usize, len: usize },
    #[error("topology has no enabled qubits")]
    EmptyTopology,
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("a random circuit needs at least one cycle")]
    NoCycles,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid circuit: {0}")]
    Invalid(String),
}

impl CircuitError {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        CircuitError::Parse {
            line,
            message: message.into(),
        }
    }
}

/// fSim gate on dense qubits `a < b`; `a` is the high bit of the 4x4 basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitGate {
    pub a: usize,
    pub b: usize,
    pub params: FsimParams,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layer {
    /// `(qubit, gate)` pairs sorted by qubit.
    Single(Vec<(usize, GateKind)>),
    Two {
        pattern: Pattern,
        gates: Vec<TwoQubitGate>,
    },
}

/// Layered circuit on dense qubit indices `0..n_qubits`.
///
/// Layers alternate single-qubit / two-qubit, starting with a single-qubit
/// layer; the two-qubit labels follow [`Pattern::SEQUENCE`]. A trailing
/// single-qubit layer is optional.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    seed: u64,
    layers: Vec<Layer>,
}

impl Circuit {
    pub fn new(n_qubits: usize, seed: u64, layers: Vec<Layer>) -> Result<Self, CircuitError> {
        let c = Self {
            n_qubits,
            seed,
            layers,
        };
        c.validate()?;
        Ok(c)
    }

    /// Circuit without any gates.
    pub fn empty(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            seed: 0,
            layers: Vec::new(),
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Number of two-qubit layers.
    pub fn cycles(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l, Layer::Two { .. }))
            .count()
    }

    pub fn pattern_sequence(&self) -> Vec<Pattern> {
        self.layers
            .iter()
            .filter_map(|l| match l {
                Layer::Two { pattern, .. } => Some(*pattern),
                Layer::Single(_) => None,
            })
            .collect()
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Two { gates, .. } => gates.len(),
                Layer::Single(_) => 0,
            })
            .sum()
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        let mut cycle = 0;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut used = vec![false; self.n_qubits];
            let mut touch = |q: usize| -> Result<(), CircuitError> {
                if q >= self.n_qubits {
                    return Err(CircuitError::Invalid(format!(
                        "layer {i}: qubit {q} out of range"
                    )));
                }
                if std::mem::replace(&mut used[q], true) {
                    return Err(CircuitError::Invalid(format!(
                        "layer {i}: qubit {q} used twice"
                    )));
                }
                Ok(())
            };
            match layer {
                Layer::Single(gates) => {
                    if i % 2 != 0 {
                        return Err(CircuitError::Invalid(format!(
                            "layer {i}: expected a two-qubit layer"
                        )));
                    }
                    for &(q, _) in gates {
                        touch(q)?;
                    }
                }
                Layer::Two { pattern, gates } => {
                    if i % 2 != 1 {
                        return Err(CircuitError::Invalid(format!(
                            "layer {i}: expected a single-qubit layer"
                        )));
                    }
                    let expected = Pattern::for_cycle(cycle);
                    if *pattern != expected {
                        return Err(CircuitError::Invalid(format!(
                            "cycle {cycle}: pattern {pattern} breaks the ABCDCDAB sequence (expected {expected})"
                        )));
                    }
                    for g in gates {
                        if g.a == g.b {
                            return Err(CircuitError::Invalid(format!(
                                "layer {i}: fSim on a single qubit {}",
                                g.a
                            )));
                        }
                        touch(g.a)?;
                        touch(g.b)?;
                        if !g.params.is_finite() || !g.params.matrix().is_unitary(1e-6) {
                            return Err(CircuitError::Invalid(format!(
                                "layer {i}: fSim on ({}, {}) is not unitary",
                                g.a, g.b
                            )));
                        }
                    }
                    cycle += 1;
                }
            }
        }
        Ok(())
    }
}

/// fSim parameters for generated circuits.
#[derive(Clone, Debug, PartialEq)]
pub enum FsimTable {
    Uniform(FsimParams),
    /// Per-coupler parameters keyed by topology qubit ids `(low, high)`; other
    /// couplers use the fallback.
    PerCoupler {
        table: BTreeMap<(u32, u32), FsimParams>,
        fallback: FsimParams,
    },
}

impl Default for FsimTable {
    fn default() -> Self {
        FsimTable::Uniform(FsimParams::default())
    }
}

impl FsimTable {
    fn lookup(&self, a: u32, b: u32) -> FsimParams {
        match self {
            FsimTable::Uniform(p) => *p,
            FsimTable::PerCoupler { table, fallback } => {
                *table.get(&(a.min(b), a.max(b))).unwrap_or(fallback)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenerateOptions {
    pub fsim: FsimTable,
    /// Append a single-qubit layer after the last two-qubit layer.
    pub final_single_layer: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            fsim: FsimTable::default(),
            final_single_layer: true,
        }
    }
}

/// Builds the seeded random circuit for `topology`.
///
/// The gate of single-qubit layer `k` on dense qubit `q` is drawn from the
/// counter stream `(seed, GATES, k, q)`, so the circuit does not depend on
/// generation order.
pub fn generate_rqc(
    topology: &Topology,
    cycles: usize,
    seed: u64,
    options: &GenerateOptions,
) -> Result<Circuit, CircuitError> {
    topology.validate()?;
    let n = topology.n_enabled();
    if n == 0 {
        return Err(CircuitError::EmptyTopology);
    }
    if cycles == 0 {
        return Err(CircuitError::NoCycles);
    }
    let single_layer = |k: usize| {
        let gates = (0..n)
            .map(|q| {
                let word = CounterRng::stream(seed, &[STREAM_GATES, k as u64, q as u64]).at(0);
                (q, GateKind::ALL[bounded(word, 3) as usize])
            })
            .collect();
        Layer::Single(gates)
    };
    let mut layers = Vec::with_capacity(2 * cycles + 1);
    for cycle in 0..cycles {
        layers.push(single_layer(cycle));
        let pattern = Pattern::for_cycle(cycle);
        let gates = topology
            .pattern_pairs(pattern)
            .into_iter()
            .map(|(a, b, ida, idb)| TwoQubitGate {
                a,
                b,
                params: options.fsim.lookup(ida, idb),
            })
            .collect();
        layers.push(Layer::Two { pattern, gates });
    }
    if options.final_single_layer {
        layers.push(single_layer(cycles));
    }
    Circuit::new(n, seed, layers)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_and_twelve_cycle_labels() {
        let topo = Topology::grid(3, 3);
        let c8 = generate_rqc(&topo, 8, 5, &GenerateOptions::default()).unwrap();
        let s: String = c8.pattern_sequence().iter().map(|p| p.letter()).collect();
        assert_eq!(s, "ABCDCDAB");
        let c12 = generate_rqc(&topo, 12, 5, &GenerateOptions::default()).unwrap();
        let s: String = c12.pattern_sequence().iter().map(|p| p.letter()).collect();
        assert_eq!(s, "ABCDCDABABCD");
    }

    #[test]
    fn generation_is_deterministic_and_seed_sensitive() {
        let topo = Topology::grid(4, 3);
        let opts = GenerateOptions::default();
        let a = generate_rqc(&topo, 6, 11, &opts).unwrap();
        let b = generate_rqc(&topo, 6, 11, &opts).unwrap();
        let c = generate_rqc(&topo, 6, 12, &opts).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn each_coupler_once_per_four_cycles() {
        let topo = Topology::grid(4, 4);
        let total = topo.couplers.len();
        let c = generate_rqc(&topo, 16, 3, &GenerateOptions::default()).unwrap();
        let two: Vec<&Vec<TwoQubitGate>> = c
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Two { gates, .. } => Some(gates),
                _ => None,
            })
            .collect();
        for window in two.chunks(4) {
            let mut pairs: Vec<(usize, usize)> = window
                .iter()
                .flat_map(|g| g.iter().map(|g| (g.a, g.b)))
                .collect();
            pairs.sort_unstable();
            let before = pairs.len();
            pairs.dedup();
            assert_eq!(before, pairs.len());
            assert_eq!(pairs.len(), total);
        }
    }

    #[test]
    fn disabled_couplers_are_omitted() {
        let mut topo = Topology::grid(3, 2);
        topo.couplers[0].enabled = false;
        let c = generate_rqc(&topo, 4, 1, &GenerateOptions::default()).unwrap();
        assert_eq!(c.two_qubit_gate_count(), topo.couplers.len() - 1);
    }

    #[test]
    fn trailing_layer_flag() {
        let topo = Topology::grid(2, 2);
        let with = generate_rqc(&topo, 3, 1, &GenerateOptions::default()).unwrap();
        let without = generate_rqc(
            &topo,
            3,
            1,
            &GenerateOptions {
                final_single_layer: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(with.layers().len(), 7);
        assert_eq!(without.layers().len(), 6);
    }

    #[test]
    fn generation_errors() {
        let topo = Topology::grid(2, 2);
        assert_eq!(
            generate_rqc(&topo, 0, 1, &GenerateOptions::default()),
            Err(CircuitError::NoCycles)
        );
        let mut empty = Topology::grid(1, 1);
        empty.qubits[0].enabled = false;
        assert_eq!(
            generate_rqc(&empty, 2, 1, &GenerateOptions::default()),
            Err(CircuitError::EmptyTopology)
        );
    }

    #[test]
    fn per_coupler_table_is_used() {
        let topo = Topology::grid(2, 1);
        let special = FsimParams::new(0.1, 0.2, 0.0, 0.0, 0.0);
        let mut table = BTreeMap::new();
        table.insert((0, 1), special);
        let opts = GenerateOptions {
            fsim: FsimTable::PerCoupler {
                table,
                fallback: FsimParams::default(),
            },
            ..Default::default()
        };
        let c = generate_rqc(&topo, 4, 1, &opts).unwrap();
        let params: Vec<FsimParams> = c
            .layers()
            .iter()
            .filter_map(|l| match l {
                Layer::Two { gates, .. } => gates.first().map(|g| g.params),
                _ => None,
            })
            .collect();
        assert_eq!(params, vec![special]);
    }
}
