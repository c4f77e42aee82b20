//! Sampling, XEB estimation, Porter-Thomas checks and the statevector
//! oracle.
//!
//! `x = N p` is a bitstring probability rescaled by `N = 2^n`. For a
//! sampler of fidelity `F` it follows `(F x + 1 - F) e^{-x}`, so the linear
//! estimator `N E[p] - 1` recovers `F`.

mod sampling;
mod statevector;
mod xeb;

use std::collections::BTreeMap;

use num_complex::{Complex32, Complex64};
use thiserror::Error;

use crate::circuit::Circuit;
use crate::engine::{format_bitstring, parse_bitstring, BatchOptions, EngineError, Simulator};
use crate::order::PlanFile;
use crate::parallel;

pub use sampling::{
    dilute_to_fidelity, frugal_sample, frugal_sample_diluted, frugal_sample_with,
    sample_from_probabilities, uniform_bitstrings, FrugalOptions, FrugalSamples, FrugalStats,
    DEFAULT_CEILING, DEFAULT_OPEN_COUNT,
};
pub use statevector::{
    basis_index, index_bits, probabilities, statevector_simulate, STATEVECTOR_MAX_QUBITS,
};
pub use xeb::{
    ks_statistic, porter_thomas_cdf, porter_thomas_pdf, xeb_fidelity, HistogramBin, HistogramSpec,
    XebReport,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("{n} qubits exceed the statevector limit of {max}")]
    TooManyQubits { n: usize, max: usize },
    #[error("no samples")]
    EmptySamples,
    #[error(
        "N*p = {np} exceeds the ceiling {ceiling} at bitstring {}; raise the ceiling",
        format_bitstring(bitstring)
    )]
    AcceptanceOverflow {
        np: f64,
        ceiling: f64,
        bitstring: Vec<u8>,
    },
    #[error("ceiling must exceed 1, got {0}")]
    BadCeiling(f64),
    #[error("fidelity must lie in [0, 1], got {0}")]
    BadFidelity(f64),
    #[error("bitstring line {line}: {message}")]
    Bitstrings { line: usize, message: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One bitstring per line; blank lines are skipped and all lengths must
/// agree.
pub fn parse_bitstrings(text: &str) -> Result<Vec<Vec<u8>>, AnalysisError> {
    let mut out: Vec<Vec<u8>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bits = parse_bitstring(line).map_err(|e| AnalysisError::Bitstrings {
            line: i + 1,
            message: e.to_string(),
        })?;
        if let Some(first) = out.first() {
            if first.len() != bits.len() {
                return Err(AnalysisError::Bitstrings {
                    line: i + 1,
                    message: format!("length {} differs from {}", bits.len(), first.len()),
                });
            }
        }
        out.push(bits);
    }
    Ok(out)
}

pub fn write_bitstrings(bitstrings: &[Vec<u8>]) -> String {
    bitstrings
        .iter()
        .map(|b| format_bitstring(b) + "\n")
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verification {
    /// `p_i` for each input bitstring, in input order.
    pub probabilities: Vec<f64>,
    /// Distinct closed-bit groups, one contraction each.
    pub batches: usize,
    pub report: XebReport,
}

/// Amplitudes of `bitstrings`, grouping bitstrings that share their closed
/// bits into one batch.
pub fn verify_amplitudes(
    sim: &Simulator,
    bitstrings: &[Vec<u8>],
) -> Result<Vec<Complex32>, AnalysisError> {
    verify_grouped(sim, bitstrings).map(|(a, _)| a)
}

fn verify_grouped(
    sim: &Simulator,
    bitstrings: &[Vec<u8>],
) -> Result<(Vec<Complex32>, usize), AnalysisError> {
    let n = sim.circuit().n_qubits();
    let open = sim.open_qubits();
    let mut groups: BTreeMap<Vec<u8>, Vec<(usize, usize)>> = BTreeMap::new();
    for (i, b) in bitstrings.iter().enumerate() {
        if b.len() != n {
            return Err(AnalysisError::Bitstrings {
                line: i + 1,
                message: format!("expected {n} bits, got {}", b.len()),
            });
        }
        let fixed: Vec<u8> = (0..n).filter(|q| !open.contains(q)).map(|q| b[q]).collect();
        let j = open.iter().fold(0usize, |j, &q| (j << 1) | b[q] as usize);
        groups.entry(fixed).or_default().push((i, j));
    }
    let keys: Vec<&Vec<u8>> = groups.keys().collect();
    let batches = parallel::map_collect(&keys, |fixed| sim.batch(fixed));
    let mut amps = vec![Complex32::new(0.0, 0.0); bitstrings.len()];
    for (batch, members) in batches.into_iter().zip(groups.values()) {
        let batch = batch?;
        for &(i, j) in members {
            amps[i] = batch.amplitudes[j];
        }
    }
    Ok((amps, groups.len()))
}

/// Evaluates every bitstring with `sim` and reports XEB statistics.
pub fn verify_bitstrings_with(
    sim: &Simulator,
    bitstrings: &[Vec<u8>],
    spec: HistogramSpec,
) -> Result<Verification, AnalysisError> {
    let (amps, batches) = verify_grouped(sim, bitstrings)?;
    let probs: Vec<f64> = amps
        .iter()
        .map(|a| a.re as f64 * a.re as f64 + a.im as f64 * a.im as f64)
        .collect();
    let report = XebReport::from_probabilities(&probs, sim.circuit().n_qubits(), spec)?;
    Ok(Verification {
        probabilities: probs,
        batches,
        report,
    })
}

/// Builds a simulator with the last `min(6, n)` qubits open (or uses the
/// given plan for that network) and verifies the bitstrings.
pub fn verify_bitstrings(
    circuit: &Circuit,
    bitstrings: &[Vec<u8>],
    plan: Option<&PlanFile>,
    options: &BatchOptions,
    spec: HistogramSpec,
) -> Result<Verification, AnalysisError> {
    let n = circuit.n_qubits();
    let open: Vec<usize> = (n - DEFAULT_OPEN_COUNT.min(n)..n).collect();
    let sim = match plan {
        Some(p) => Simulator::with_plan(circuit, &open, p, options)?,
        None => Simulator::new(circuit, &open, options)?,
    };
    verify_bitstrings_with(&sim, bitstrings, spec)
}

/// One row of the tensor-network versus statevector comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleRow {
    pub bitstring: Vec<u8>,
    pub tnc: Complex32,
    pub exact: Complex64,
}

impl OracleRow {
    /// `|tnc - exact| / |exact|`; infinite when the exact amplitude vanishes
    /// and the estimate does not.
    pub fn relative_error(&self) -> f64 {
        let d = (Complex64::new(self.tnc.re as f64, self.tnc.im as f64) - self.exact).norm();
        if d == 0.0 {
            0.0
        } else {
            d / self.exact.norm()
        }
    }
}

/// Amplitudes of `bitstrings` from `sim` next to the statevector values.
pub fn oracle_compare(
    sim: &Simulator,
    bitstrings: &[Vec<u8>],
) -> Result<Vec<OracleRow>, AnalysisError> {
    let state = statevector_simulate(sim.circuit())?;
    let v = verify_amplitudes(sim, bitstrings)?;
    Ok(bitstrings
        .iter()
        .zip(v)
        .map(|(b, tnc)| OracleRow {
            bitstring: b.clone(),
            tnc,
            exact: state[basis_index(b)],
        })
        .collect())
}

/// Fixed-width table with one line per bitstring and a closing summary.
pub fn format_oracle_table(rows: &[OracleRow]) -> String {
    let n = rows.first().map_or(9, |r| r.bitstring.len()).max(9);
    let mut s = format!(
        "{:<n$}  {:>14}  {:>14}  {:>14}  {:>14}  {:>10}\n",
        "bitstring", "re", "im", "exact re", "exact im", "rel error"
    );
    let mut worst = 0.0f64;
    for r in rows {
        let e = r.relative_error();
        worst = worst.max(e);
        s.push_str(&format!(
            "{:<n$}  {:>14.7e}  {:>14.7e}  {:>14.7e}  {:>14.7e}  {:>10.3e}\n",
            format_bitstring(&r.bitstring),
            r.tnc.re,
            r.tnc.im,
            r.exact.re,
            r.exact.im,
            e
        ));
    }
    s.push_str(&format!(
        "max relative error {worst:.3e} over {} amplitudes\n",
        rows.len()
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{builtin_topology, generate_rqc, GenerateOptions};

    #[test]
    fn bitstring_file_round_trip() {
        let bits = vec![vec![0, 1, 1], vec![1, 0, 0]];
        let text = write_bitstrings(&bits);
        assert_eq!(text, "011\n100\n");
        assert_eq!(parse_bitstrings(&text).unwrap(), bits);
        assert_eq!(parse_bitstrings("01\n\n10\n").unwrap().len(), 2);
        assert!(matches!(
            parse_bitstrings("01\n012\n"),
            Err(AnalysisError::Bitstrings { line: 2, .. })
        ));
        assert!(matches!(
            parse_bitstrings("01\n011\n"),
            Err(AnalysisError::Bitstrings { line: 2, .. })
        ));
    }

    #[test]
    fn verify_matches_statevector() {
        let c = generate_rqc(
            &builtin_topology("grid(3x3)").unwrap(),
            8,
            4,
            &GenerateOptions::default(),
        )
        .unwrap();
        let probs = probabilities(&statevector_simulate(&c).unwrap());
        let bits: Vec<Vec<u8>> = sample_from_probabilities(&probs, 300, 1)
            .into_iter()
            .map(|i| index_bits(i, 9))
            .collect();
        let v = verify_bitstrings(
            &c,
            &bits,
            None,
            &BatchOptions::default(),
            HistogramSpec::default(),
        )
        .unwrap();
        assert!(v.batches <= 8);
        for (b, p) in bits.iter().zip(&v.probabilities) {
            let exact = probs[basis_index(b)];
            assert!(
                (p - exact).abs() <= 1e-5 * exact.max(1.0 / 512.0),
                "{p} vs {exact}"
            );
        }
        assert_eq!(v.report.n_samples, 300);
        assert!(v.report.fidelity > 0.5);
    }

    #[test]
    fn oracle_table_columns() {
        let c = generate_rqc(
            &builtin_topology("grid(2x4)").unwrap(),
            6,
            2,
            &GenerateOptions::default(),
        )
        .unwrap();
        let sim = Simulator::new(&c, &[6, 7], &BatchOptions::default()).unwrap();
        let bits = uniform_bitstrings(8, 5, 3);
        let rows = oracle_compare(&sim, &bits).unwrap();
        assert!(rows.iter().all(|r| r.relative_error() < 1e-5));
        let table = format_oracle_table(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 7);
        assert!(lines[0].starts_with("bitstring") && lines[0].ends_with("rel error"));
        assert!(lines[1].starts_with(&format_bitstring(&bits[0])));
        assert_eq!(lines[1].split_whitespace().count(), 6);
        assert!(lines[6].starts_with("max relative error"));
    }
}
