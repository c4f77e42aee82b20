//! Amplitude batches over open qubits and their JSON-lines output.

use std::io::Write;

use num_complex::Complex32;
use serde::{Deserialize, Serialize};

use super::{execute, EngineConfig, EngineError, Telemetry};
use crate::circuit::Circuit;
use crate::network::{circuit_to_network, simplify_traced, SimplifyTrace, TensorNetwork};
use crate::order::{find_order, ContractionPlan, OrderOptions, PlanFile};

pub const DEFAULT_OPEN_CAP: usize = 6;

/// Amplitudes of every assignment of the open qubits, with the closed qubits
/// fixed. Entry `j` assigns bit `k - 1 - i` of `j` to `open_qubits[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudeBatch {
    pub fixed_bits: Vec<u8>,
    pub open_qubits: Vec<usize>,
    pub amplitudes: Vec<Complex32>,
}

impl AmplitudeBatch {
    pub fn n_qubits(&self) -> usize {
        self.fixed_bits.len() + self.open_qubits.len()
    }

    /// Full bitstring of entry `j`, qubit 0 first.
    pub fn bitstring(&self, j: usize) -> Vec<u8> {
        let k = self.open_qubits.len();
        let mut bits = vec![0u8; self.n_qubits()];
        let mut fixed = self.fixed_bits.iter();
        for (q, b) in bits.iter_mut().enumerate() {
            *b = match self.open_qubits.iter().position(|&o| o == q) {
                Some(i) => ((j >> (k - 1 - i)) & 1) as u8,
                None => *fixed.next().unwrap(),
            };
        }
        bits
    }

    pub fn records(&self) -> Vec<AmplitudeRecord> {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, a)| AmplitudeRecord::new(&self.bitstring(j), *a))
            .collect()
    }
}

/// One line of the amplitude output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeRecord {
    pub bitstring: String,
    pub re: f64,
    pub im: f64,
}

impl AmplitudeRecord {
    /// Stores the shortest decimal that reads back as the same `f32`.
    pub fn new(bits: &[u8], amp: Complex32) -> Self {
        let short = |x: f32| x.to_string().parse::<f64>().expect("float text");
        Self {
            bitstring: format_bitstring(bits),
            re: short(amp.re),
            im: short(amp.im),
        }
    }

    pub fn amplitude(&self) -> Complex32 {
        Complex32::new(self.re as f32, self.im as f32)
    }
}

pub fn write_amplitudes(records: &[AmplitudeRecord], mut w: impl Write) -> Result<(), EngineError> {
    for r in records {
        let line = serde_json::to_string(r).expect("record serializes");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

pub fn parse_amplitudes(text: &str) -> Result<Vec<AmplitudeRecord>, EngineError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let r: AmplitudeRecord = serde_json::from_str(l).map_err(|e| EngineError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
            parse_bitstring(&r.bitstring).map_err(|e| EngineError::Record {
                line: i + 1,
                message: e.to_string(),
            })?;
            Ok(r)
        })
        .collect()
}

pub fn parse_bitstring(s: &str) -> Result<Vec<u8>, EngineError> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(EngineError::BadBitstring(format!(
                "unexpected character `{other}` in `{s}`"
            ))),
        })
        .collect()
}

pub fn format_bitstring(bits: &[u8]) -> String {
    bits.iter()
        .map(|&b| if b == 0 { '0' } else { '1' })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchOptions {
    pub order: OrderOptions,
    pub engine: EngineConfig,
    pub open_cap: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            order: OrderOptions::default(),
            engine: EngineConfig::default(),
            open_cap: DEFAULT_OPEN_CAP,
        }
    }
}

/// Builds the network with open legs, orders it and contracts once.
pub fn amplitudes_batch(
    circuit: &Circuit,
    fixed_bits: &[u8],
    open_qubits: &[usize],
    options: &BatchOptions,
) -> Result<AmplitudeBatch, EngineError> {
    Simulator::new(circuit, open_qubits, options)?.batch(fixed_bits)
}

/// Reusable simulator for one circuit and open-qubit set.
///
/// Simplification and order search run once; each batch rebuilds the
/// network for its output bits, replays the recorded simplification and
/// executes the stored plan.
#[derive(Clone, Debug)]
pub struct Simulator {
    circuit: Circuit,
    open_qubits: Vec<usize>,
    trace: SimplifyTrace,
    plan: ContractionPlan,
    engine: EngineConfig,
}

impl Simulator {
    pub fn new(
        circuit: &Circuit,
        open_qubits: &[usize],
        options: &BatchOptions,
    ) -> Result<Self, EngineError> {
        let (net, trace) = Self::template(circuit, open_qubits, options.open_cap)?;
        let plan = find_order(&net, &options.order)?;
        Ok(Self {
            circuit: circuit.clone(),
            open_qubits: open_qubits.to_vec(),
            trace,
            plan,
            engine: options.engine.clone(),
        })
    }

    /// Simulator using a stored plan for the simplified network.
    pub fn with_plan(
        circuit: &Circuit,
        open_qubits: &[usize],
        plan: &PlanFile,
        options: &BatchOptions,
    ) -> Result<Self, EngineError> {
        let (net, trace) = Self::template(circuit, open_qubits, options.open_cap)?;
        let plan = ContractionPlan::new(
            &net,
            plan.tree.clone(),
            plan.slices.clone(),
            plan.max_size_log2,
        )?;
        Ok(Self {
            circuit: circuit.clone(),
            open_qubits: open_qubits.to_vec(),
            trace,
            plan,
            engine: options.engine.clone(),
        })
    }

    fn template(
        circuit: &Circuit,
        open: &[usize],
        cap: usize,
    ) -> Result<(TensorNetwork, SimplifyTrace), EngineError> {
        if open.len() > cap {
            return Err(EngineError::OpenCapExceeded {
                open: open.len(),
                cap,
            });
        }
        let zeros = vec![0u8; circuit.n_qubits().saturating_sub(open.len())];
        Ok(simplify_traced(circuit_to_network(circuit, &zeros, open)?)?)
    }

    pub fn plan(&self) -> &ContractionPlan {
        &self.plan
    }

    pub fn plan_file(&self) -> PlanFile {
        PlanFile {
            max_size_log2: self.plan.max_size_log2,
            slices: self.plan.slices.clone(),
            tree: self.plan.tree.clone(),
        }
    }

    pub fn open_qubits(&self) -> &[usize] {
        &self.open_qubits
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub fn engine(&self) -> &EngineConfig {
        &self.engine
    }

    pub fn set_engine(&mut self, engine: EngineConfig) {
        self.engine = engine;
    }

    /// Simplified network for the given closed-qubit bits.
    pub fn network(&self, fixed_bits: &[u8]) -> Result<TensorNetwork, EngineError> {
        let net = circuit_to_network(&self.circuit, fixed_bits, &self.open_qubits)?;
        Ok(self.trace.replay(net)?)
    }

    pub fn batch_with_telemetry(
        &self,
        fixed_bits: &[u8],
    ) -> Result<(AmplitudeBatch, Telemetry), EngineError> {
        let net = self.network(fixed_bits)?;
        let exec = execute(&net, &self.plan, &self.engine)?;
        let batch = AmplitudeBatch {
            fixed_bits: fixed_bits.to_vec(),
            open_qubits: self.open_qubits.clone(),
            amplitudes: exec.tensor.into_vec(),
        };
        Ok((batch, exec.telemetry))
    }

    pub fn batch(&self, fixed_bits: &[u8]) -> Result<AmplitudeBatch, EngineError> {
        self.batch_with_telemetry(fixed_bits).map(|(b, _)| b)
    }

    /// Amplitude of a full bitstring (qubit 0 first).
    pub fn amplitude(&self, bits: &[u8]) -> Result<Complex32, EngineError> {
        if bits.len() != self.circuit.n_qubits() {
            return Err(EngineError::BadBitstring(format!(
                "expected {} bits, got {}",
                self.circuit.n_qubits(),
                bits.len()
            )));
        }
        let fixed: Vec<u8> = bits
            .iter()
            .enumerate()
            .filter(|(q, _)| !self.open_qubits.contains(q))
            .map(|(_, b)| *b)
            .collect();
        let j = self
            .open_qubits
            .iter()
            .fold(0usize, |j, &q| (j << 1) | bits[q] as usize);
        Ok(self.batch(&fixed)?.amplitudes[j])
    }
}
