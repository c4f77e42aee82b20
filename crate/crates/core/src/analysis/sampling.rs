//! Frugal rejection sampling, fidelity dilution and reference samplers.

use rand::RngCore;

use super::AnalysisError;
use crate::circuit::Circuit;
use crate::engine::{BatchOptions, Simulator};
use crate::parallel;
use crate::rng::{CounterRng, STREAM_BITSTRINGS, STREAM_DILUTION, STREAM_SAMPLING};

pub const DEFAULT_CEILING: f64 = 20.0;
pub const DEFAULT_OPEN_COUNT: usize = 6;

fn random_bits(rng: &mut CounterRng, n: usize) -> Vec<u8> {
    let mut bits = Vec::with_capacity(n);
    while bits.len() < n {
        let w = rng.next_u64();
        bits.extend((0..64.min(n - bits.len())).map(|i| ((w >> i) & 1) as u8));
    }
    bits
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrugalOptions {
    pub open_count: usize,
    /// Envelope `M`: entry acceptance probability is `N p / M`.
    pub ceiling: f64,
    pub seed: u64,
    pub batch: BatchOptions,
}

impl Default for FrugalOptions {
    fn default() -> Self {
        Self {
            open_count: DEFAULT_OPEN_COUNT,
            ceiling: DEFAULT_CEILING,
            seed: 0,
            batch: BatchOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FrugalStats {
    pub batches: u64,
    pub candidates: u64,
    pub accepted: u64,
}

impl FrugalStats {
    pub fn acceptance_rate(&self) -> f64 {
        self.accepted as f64 / self.candidates.max(1) as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrugalSamples {
    pub bitstrings: Vec<Vec<u8>>,
    pub stats: FrugalStats,
}

/// Samples `n_samples` bitstrings of `circuit`. The last `open_count`
/// qubits are left open in every batch.
pub fn frugal_sample(
    circuit: &Circuit,
    n_samples: usize,
    options: &FrugalOptions,
) -> Result<FrugalSamples, AnalysisError> {
    let n = circuit.n_qubits();
    let k = options.open_count.min(n);
    let open: Vec<usize> = (n - k..n).collect();
    let sim = Simulator::new(circuit, &open, &options.batch)?;
    frugal_sample_with(&sim, n_samples, options.ceiling, options.seed)
}

struct BatchDraw {
    accepted: Vec<Vec<u8>>,
    candidates: u64,
    overflow: Option<(f64, Vec<u8>)>,
}

/// Frugal sampling with a prepared simulator.
///
/// Batch `b` draws its closed bits and acceptance coins from the stream
/// `(seed, [SAMPLING, b])`. Batches are evaluated in parallel rounds and
/// consumed in index order, so the output depends only on the seed.
pub fn frugal_sample_with(
    sim: &Simulator,
    n_samples: usize,
    ceiling: f64,
    seed: u64,
) -> Result<FrugalSamples, AnalysisError> {
    if !(ceiling > 1.0) {
        return Err(AnalysisError::BadCeiling(ceiling));
    }
    let n = sim.circuit().n_qubits();
    let k = sim.open_qubits().len();
    let dim = 2f64.powi(n as i32);
    let per_batch = 2f64.powi(k as i32) / ceiling;

    let run = |b: &u64| -> Result<BatchDraw, AnalysisError> {
        let mut rng = CounterRng::stream(seed, &[STREAM_SAMPLING, *b]);
        let fixed = random_bits(&mut rng, n - k);
        let batch = sim.batch(&fixed)?;
        let mut accepted = Vec::new();
        for (j, a) in batch.amplitudes.iter().enumerate() {
            let np = dim * (a.re as f64 * a.re as f64 + a.im as f64 * a.im as f64);
            if np > ceiling {
                return Ok(BatchDraw {
                    accepted,
                    candidates: j as u64 + 1,
                    overflow: Some((np, batch.bitstring(j))),
                });
            }
            if rng.next_f64() * ceiling < np {
                accepted.push(batch.bitstring(j));
            }
        }
        Ok(BatchDraw {
            accepted,
            candidates: batch.amplitudes.len() as u64,
            overflow: None,
        })
    };

    let mut out = FrugalSamples {
        bitstrings: Vec::with_capacity(n_samples),
        stats: FrugalStats::default(),
    };
    let mut next = 0u64;
    while out.bitstrings.len() < n_samples {
        let remaining = (n_samples - out.bitstrings.len()) as f64;
        let round = ((remaining / per_batch * 1.05).ceil() as u64)
            .clamp(parallel::current_workers() as u64, 4096);
        let ids: Vec<u64> = (next..next + round).collect();
        next += round;
        for draw in parallel::map_collect(&ids, run) {
            let draw = draw?;
            out.stats.batches += 1;
            out.stats.candidates += draw.candidates;
            if let Some((np, bits)) = draw.overflow {
                return Err(AnalysisError::AcceptanceOverflow {
                    np,
                    ceiling,
                    bitstring: bits,
                });
            }
            for bits in draw.accepted {
                if out.bitstrings.len() < n_samples {
                    out.bitstrings.push(bits);
                    out.stats.accepted += 1;
                }
            }
            if out.bitstrings.len() >= n_samples {
                break;
            }
        }
    }
    log::info!(
        "frugal sampling: {} samples from {} batches, acceptance {:.4}",
        out.stats.accepted,
        out.stats.batches,
        out.stats.acceptance_rate()
    );
    Ok(out)
}

/// Slot `i` of a diluted stream: `None` keeps the perfect sample,
/// otherwise the uniform replacement. Draws come from `(seed, [DILUTION, i])`.
fn dilution_slot(seed: u64, i: usize, f: f64, n_qubits: usize) -> Option<Vec<u8>> {
    let mut rng = CounterRng::stream(seed, &[STREAM_DILUTION, i as u64]);
    if rng.next_f64() < f {
        None
    } else {
        Some(random_bits(&mut rng, n_qubits))
    }
}

/// Keeps sample `i` with probability `f`, otherwise replaces it with a
/// uniform bitstring.
pub fn dilute_to_fidelity(
    samples: &[Vec<u8>],
    f: f64,
    n_qubits: usize,
    seed: u64,
) -> Result<Vec<Vec<u8>>, AnalysisError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(AnalysisError::BadFidelity(f));
    }
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, s)| dilution_slot(seed, i, f, n_qubits).unwrap_or_else(|| s.clone()))
        .collect())
}

/// `n_samples` bitstrings at fidelity `f`, contracting only the kept slots.
/// Slot decisions match [`dilute_to_fidelity`] with `options.seed`; the
/// `j`-th kept slot holds the `j`-th frugal sample.
pub fn frugal_sample_diluted(
    circuit: &Circuit,
    n_samples: usize,
    f: f64,
    options: &FrugalOptions,
) -> Result<FrugalSamples, AnalysisError> {
    if !(0.0..=1.0).contains(&f) {
        return Err(AnalysisError::BadFidelity(f));
    }
    let n = circuit.n_qubits();
    let slots: Vec<Option<Vec<u8>>> = (0..n_samples)
        .map(|i| dilution_slot(options.seed, i, f, n))
        .collect();
    let kept = slots.iter().filter(|s| s.is_none()).count();
    let perfect = if kept > 0 {
        frugal_sample(circuit, kept, options)?
    } else {
        FrugalSamples {
            bitstrings: Vec::new(),
            stats: FrugalStats::default(),
        }
    };
    let mut it = perfect.bitstrings.into_iter();
    let bitstrings = slots
        .into_iter()
        .map(|s| s.unwrap_or_else(|| it.next().expect("one frugal sample per kept slot")))
        .collect();
    Ok(FrugalSamples {
        bitstrings,
        stats: perfect.stats,
    })
}

/// `count` uniform bitstrings; bitstring `i` uses `(seed, [BITSTRINGS, i])`.
pub fn uniform_bitstrings(n_qubits: usize, count: usize, seed: u64) -> Vec<Vec<u8>> {
    (0..count)
        .map(|i| {
            random_bits(
                &mut CounterRng::stream(seed, &[STREAM_BITSTRINGS, i as u64]),
                n_qubits,
            )
        })
        .collect()
}

/// Basis indices drawn from `probabilities` by inverse-CDF lookup.
pub fn sample_from_probabilities(probabilities: &[f64], count: usize, seed: u64) -> Vec<usize> {
    let mut cdf = Vec::with_capacity(probabilities.len());
    let mut acc = 0.0;
    for p in probabilities {
        acc += p;
        cdf.push(acc);
    }
    let mut rng = CounterRng::stream(seed, &[STREAM_SAMPLING]);
    (0..count)
        .map(|_| {
            let u = rng.next_f64() * acc;
            cdf.partition_point(|&c| c <= u)
                .min(probabilities.len() - 1)
        })
        .collect()
}
