//! Pairwise contraction kernels.
//!
//! Both kernels contract every label shared by `a` and `b` and return a tensor
//! labelled `(a-only, b-only)`, each group in source order.
//!
//! [`contract_naive`] permutes both operands into matrix form and multiplies
//! them. [`contract_fused`] targets skewed contractions where `a` is much
//! larger than `b`: `a` is streamed exactly once in batches of
//! `2^batch_log2` elements, each batch holding every shared index plus the
//! lowest `a`-only indices, while `b` stays resident in matrix form. A batch
//! owns a contiguous block of the output, so batches run in parallel without
//! any reduction and results do not depend on the worker count.
//!
//! Both kernels accumulate products in `f64` and round each output entry once.

use std::sync::atomic::{AtomicU64, Ordering};

use num_complex::{Complex32, Complex64};

use super::{Label, Tensor, TensorError, MAX_RANK};
use crate::parallel;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelConfig {
    /// log2 of the number of `a` elements fetched per batch.
    pub batch_log2: usize,
    /// log2 of the number of `b` elements one worker keeps resident; larger
    /// `b` is split into column partitions that rotate through the workers.
    pub resident_log2: usize,
    pub max_rank: usize,
}

impl Default for KernelConfig {
    fn default() -> Self {
        // 2^15 complex f32 values = 256 KiB resident per worker.
        Self {
            batch_log2: 13,
            resident_log2: 15,
            max_rank: MAX_RANK,
        }
    }
}

/// Work counters of one fused contraction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KernelStats {
    /// Complex multiply-adds executed.
    pub macs: u64,
    /// Elements of the large operand loaded.
    pub a_reads: u64,
    pub batches: u64,
    /// Number of column partitions of the small operand.
    pub b_partitions: u64,
}

struct Split {
    shared: Vec<Label>,
    a_only: Vec<Label>,
    b_only: Vec<Label>,
}

fn split_labels(a: &Tensor, b: &Tensor, max_rank: usize) -> Result<Split, TensorError> {
    let shared: Vec<Label> = a
        .labels()
        .iter()
        .copied()
        .filter(|l| b.labels().contains(l))
        .collect();
    let a_only: Vec<Label> = a
        .labels()
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    let b_only: Vec<Label> = b
        .labels()
        .iter()
        .copied()
        .filter(|l| !shared.contains(l))
        .collect();
    let rank = a_only.len() + b_only.len();
    if rank > max_rank.min(MAX_RANK) {
        return Err(TensorError::RankTooLarge {
            rank,
            max: max_rank.min(MAX_RANK),
        });
    }
    Ok(Split {
        shared,
        a_only,
        b_only,
    })
}

fn concat(parts: &[&[Label]]) -> Vec<Label> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Reference contraction: permute to `[a-only, shared] x [shared, b-only]`
/// and multiply the two matrices, accumulating each row in `f64`.
pub fn contract_naive(a: &Tensor, b: &Tensor, max_rank: usize) -> Result<Tensor, TensorError> {
    let Split {
        shared,
        a_only,
        b_only,
    } = split_labels(a, b, max_rank)?;
    let am = a.permute(&concat(&[&a_only, &shared]))?.to_vec();
    let bm = b.permute(&concat(&[&shared, &b_only]))?.to_vec();
    let (np, ns, nq) = (
        1usize << a_only.len(),
        1usize << shared.len(),
        1usize << b_only.len(),
    );
    let wide = |z: &Complex32| Complex64::new(z.re as f64, z.im as f64);
    let mut c = vec![Complex32::new(0.0, 0.0); np * nq];
    let mut acc = vec![Complex64::new(0.0, 0.0); nq];
    for (p, row) in c.chunks_mut(nq).enumerate() {
        acc.fill(Complex64::new(0.0, 0.0));
        for s in 0..ns {
            let x = wide(&am[p * ns + s]);
            for (sum, y) in acc.iter_mut().zip(&bm[s * nq..(s + 1) * nq]) {
                *sum += x * wide(y);
            }
        }
        for (out, sum) in row.iter_mut().zip(&acc) {
            *out = Complex32::new(sum.re as f32, sum.im as f32);
        }
    }
    Tensor::new(concat(&[&a_only, &b_only]), c)
}

pub fn contract_fused(
    a: &Tensor,
    b: &Tensor,
    config: &KernelConfig,
) -> Result<Tensor, TensorError> {
    contract_fused_with_stats(a, b, config).map(|(t, _)| t)
}

/// Scatters the low bits of `value` into the set bits of `mask`.
#[inline]
fn deposit(mut value: usize, mask: usize) -> usize {
    let mut out = 0;
    let mut m = mask;
    while m != 0 {
        let bit = m & m.wrapping_neg();
        if value & 1 == 1 {
            out |= bit;
        }
        value >>= 1;
        m ^= bit;
    }
    out
}

/// Next submask of `mask` in increasing order.
#[inline]
fn next_in(x: usize, mask: usize) -> usize {
    (x | !mask).wrapping_add(1) & mask
}

/// Output columns accumulated together in `f64`.
const STRIP: usize = 256;

#[inline(always)]
fn widen(z: Complex32) -> Complex64 {
    Complex64::new(z.re as f64, z.im as f64)
}

pub fn contract_fused_with_stats(
    a: &Tensor,
    b: &Tensor,
    config: &KernelConfig,
) -> Result<(Tensor, KernelStats), TensorError> {
    if b.len() > a.len() {
        // Stream the larger operand, then restore the (a-only, b-only) order.
        let (swapped, stats) = contract_fused_with_stats(b, a, config)?;
        let Split { a_only, b_only, .. } = split_labels(a, b, config.max_rank)?;
        return Ok((swapped.permute(&concat(&[&a_only, &b_only]))?, stats));
    }
    let Split {
        shared,
        a_only,
        b_only,
    } = split_labels(a, b, config.max_rank)?;
    if shared.len() > config.batch_log2 {
        return Err(TensorError::BatchTooSmall {
            batch_log2: config.batch_log2,
            shared: shared.len(),
        });
    }
    let rank_a = a.rank();
    let bit_of = |l: &Label| rank_a - 1 - a.position(*l).expect("label of a");

    let batch_bits = rank_a.min(config.batch_log2);
    let n_batch_p = batch_bits - shared.len();
    let (outer, batch_p) = a_only.split_at(a_only.len() - n_batch_p);
    let outer_mask = outer.iter().fold(0usize, |m, l| m | 1 << bit_of(l));
    let batch_mask = ((1usize << rank_a) - 1) & !outer_mask;
    let run_bits = (!batch_mask).trailing_zeros() as usize;
    let gather_mask = batch_mask & !((1usize << run_bits) - 1);

    // Batch-local index = bits of `batch_mask` compacted, preserving order.
    let local_bit = |l: &Label| (batch_mask & ((1usize << bit_of(l)) - 1)).count_ones() as usize;
    let p_mask = batch_p.iter().fold(0usize, |m, l| m | 1 << local_bit(l));
    let s_mask = shared.iter().fold(0usize, |m, l| m | 1 << local_bit(l));

    let np = 1usize << batch_p.len();
    let ns = 1usize << shared.len();
    let nq = 1usize << b_only.len();
    let width_log2 = if ns * nq <= 1 << config.resident_log2 {
        b_only.len()
    } else {
        config
            .resident_log2
            .saturating_sub(shared.len())
            .min(b_only.len())
    };
    let width = 1usize << width_log2;
    let n_parts = nq / width;
    // Partition j of `b` is the contiguous j-th chunk of `[q_high, shared, q_low]`.
    let (q_high, q_low) = b_only.split_at(b_only.len() - width_log2);
    let b_parts = b.permute(&concat(&[q_high, &shared, q_low]))?.into_vec();
    let part_len = ns * width;

    let block_len = np * nq;
    let mut out = vec![Complex32::new(0.0, 0.0); (1usize << outer.len()) * block_len];
    let macs = AtomicU64::new(0);
    let reads = AtomicU64::new(0);
    let batch_len = 1usize << batch_bits;
    let run = 1usize << run_bits;

    parallel::for_each_chunk_mut(
        &mut out,
        block_len,
        || {
            (
                vec![Complex32::new(0.0, 0.0); batch_len],
                vec![Complex64::new(0.0, 0.0); STRIP],
            )
        },
        |block_index, block, (buf, acc)| {
            let base = deposit(block_index, outer_mask);
            let mut src = 0usize;
            for chunk in buf.chunks_mut(run) {
                a.read_run(base | src, chunk);
                src = next_in(src, gather_mask);
            }
            for step in 0..n_parts {
                let part = (block_index + step) % n_parts;
                let bm = &b_parts[part * part_len..(part + 1) * part_len];
                let q0 = part * width;
                let mut p_off = 0usize;
                for row in block.chunks_mut(nq) {
                    let row = &mut row[q0..q0 + width];
                    for (c0, strip) in (0..width).step_by(STRIP).zip(row.chunks_mut(STRIP)) {
                        let acc = &mut acc[..strip.len()];
                        acc.fill(Complex64::new(0.0, 0.0));
                        let mut s_off = 0usize;
                        for brow in bm.chunks(width) {
                            let x = widen(buf[p_off | s_off]);
                            for (acc, y) in acc.iter_mut().zip(&brow[c0..c0 + strip.len()]) {
                                *acc += x * widen(*y);
                            }
                            s_off = next_in(s_off, s_mask);
                        }
                        for (o, a) in strip.iter_mut().zip(acc.iter()) {
                            *o = Complex32::new(a.re as f32, a.im as f32);
                        }
                    }
                    p_off = next_in(p_off, p_mask);
                }
            }
            macs.fetch_add((np * ns * nq) as u64, Ordering::Relaxed);
            reads.fetch_add(batch_len as u64, Ordering::Relaxed);
        },
    );

    let stats = KernelStats {
        macs: macs.into_inner(),
        a_reads: reads.into_inner(),
        batches: (out.len() / block_len) as u64,
        b_partitions: n_parts as u64,
    };
    Ok((Tensor::new(concat(&[outer, batch_p, &b_only]), out)?, stats))
}
