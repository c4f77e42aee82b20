//! Schrödinger-style reference simulator in double precision.

use num_complex::Complex64;

use super::AnalysisError;
use crate::circuit::{fsim, Circuit, GateMatrix, Layer};

pub const STATEVECTOR_MAX_QUBITS: usize = 26;

/// Final state of `circuit` from `|0...0>`. Basis index bit `n - 1 - q`
/// holds qubit `q`, so qubit 0 is the first character of a bitstring.
pub fn statevector_simulate(circuit: &Circuit) -> Result<Vec<Complex64>, AnalysisError> {
    let n = circuit.n_qubits();
    if n > STATEVECTOR_MAX_QUBITS {
        return Err(AnalysisError::TooManyQubits {
            n,
            max: STATEVECTOR_MAX_QUBITS,
        });
    }
    let mut state = vec![Complex64::new(0.0, 0.0); 1 << n];
    state[0] = Complex64::new(1.0, 0.0);
    for layer in circuit.layers() {
        match layer {
            Layer::Single(gates) => {
                for &(q, kind) in gates {
                    apply_single(&mut state, n, q, &kind.matrix());
                }
            }
            Layer::Two { gates, .. } => {
                for g in gates {
                    apply_two(&mut state, n, g.a, g.b, &fsim(&g.params));
                }
            }
        }
    }
    Ok(state)
}

fn apply_single(state: &mut [Complex64], n: usize, q: usize, m: &GateMatrix) {
    let bit = 1usize << (n - 1 - q);
    let [u00, u01, u10, u11] = [m.get(0, 0), m.get(0, 1), m.get(1, 0), m.get(1, 1)];
    for i in 0..state.len() {
        if i & bit == 0 {
            let (a, b) = (state[i], state[i | bit]);
            state[i] = u00 * a + u01 * b;
            state[i | bit] = u10 * a + u11 * b;
        }
    }
}

fn apply_two(state: &mut [Complex64], n: usize, qa: usize, qb: usize, m: &GateMatrix) {
    let (ba, bb) = (1usize << (n - 1 - qa), 1usize << (n - 1 - qb));
    for i in 0..state.len() {
        if i & (ba | bb) == 0 {
            let idx = [i, i | bb, i | ba, i | ba | bb];
            let v = idx.map(|j| state[j]);
            for (r, &j) in idx.iter().enumerate() {
                state[j] = (0..4).map(|c| m.get(r, c) * v[c]).sum();
            }
        }
    }
}

/// `|amp|^2` for every basis state.
pub fn probabilities(state: &[Complex64]) -> Vec<f64> {
    state.iter().map(|a| a.norm_sqr()).collect()
}

/// Basis index of a bitstring (qubit 0 most significant).
pub fn basis_index(bits: &[u8]) -> usize {
    bits.iter().fold(0usize, |i, &b| (i << 1) | b as usize)
}

pub fn index_bits(index: usize, n: usize) -> Vec<u8> {
    (0..n).map(|q| ((index >> (n - 1 - q)) & 1) as u8).collect()
}
