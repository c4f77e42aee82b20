use num_complex::Complex32;

use super::Tensor;

/// Data of `t` with output index `i` taken from input index `source[i]`.
///
/// The longest common suffix of the two index orders is copied as contiguous
/// runs; the remaining indices are walked with an odometer that updates the
/// input offset incrementally.
pub(super) fn permute_data(t: &Tensor, source: &[usize]) -> Vec<Complex32> {
    let owned;
    let src: &[Complex32] = match t.data() {
        Some(d) => d,
        None => {
            owned = t.to_vec();
            &owned
        }
    };
    let rank = source.len();
    let mut run_bits = 0;
    while run_bits < rank && source[rank - 1 - run_bits] == rank - 1 - run_bits {
        run_bits += 1;
    }
    let run = 1usize << run_bits;
    let outer = rank - run_bits;
    // input stride of each outer output index, innermost first
    let strides: Vec<usize> = (0..outer)
        .rev()
        .map(|i| 1usize << (rank - 1 - source[i]))
        .collect();

    let mut out = vec![Complex32::new(0.0, 0.0); t.len()];
    let mut digits = vec![false; outer];
    let mut offset = 0usize;
    let mut advance = |offset: &mut usize| {
        for (d, &stride) in digits.iter_mut().zip(&strides) {
            if *d {
                *d = false;
                *offset -= stride;
            } else {
                *d = true;
                *offset += stride;
                break;
            }
        }
    };
    if run == 1 {
        for o in out.iter_mut() {
            *o = src[offset];
            advance(&mut offset);
        }
    } else {
        for chunk in out.chunks_mut(run) {
            chunk.copy_from_slice(&src[offset..offset + run]);
            advance(&mut offset);
        }
    }
    out
}
