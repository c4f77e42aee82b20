//! Counter-based random numbers.
//!
//! All randomness in the crate is derived from a single 64-bit seed. The
//! generator is SplitMix64 read as a counter-based function: the i-th output
//! of a stream with key `k` is `mix64(k + (i + 1) * GOLDEN)`, so any output
//! can be computed directly from `(key, counter)` without replaying the
//! stream. Independent streams are obtained with [`derive_key`], which hashes
//! the parent key together with a list of tags (for example
//! `[GATES, layer, qubit]`).
//!
//! Stream tags used by the crate are the `STREAM_*` constants below.

use rand::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub const STREAM_GATES: u64 = 0x01;
pub const STREAM_PARTITION: u64 = 0x02;
pub const STREAM_SAMPLING: u64 = 0x03;
pub const STREAM_DILUTION: u64 = 0x04;
pub const STREAM_BITSTRINGS: u64 = 0x05;
pub const STREAM_CIRCUITS: u64 = 0x06;

/// The SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the key of a child stream from a parent key and a tag path.
pub fn derive_key(parent: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(mix64(parent ^ GOLDEN), |acc, &tag| {
        mix64(acc ^ mix64(tag.wrapping_add(GOLDEN)))
    })
}

/// Uniform integer in `0..n` from one 64-bit word (multiply-shift).
#[inline]
pub fn bounded(word: u64, n: u64) -> u64 {
    ((word as u128 * n as u128) >> 64) as u64
}

/// Keyed SplitMix64 counter generator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterRng {
    key: u64,
    counter: u64,
}

impl CounterRng {
    pub fn new(key: u64) -> Self {
        Self { key, counter: 0 }
    }

    /// Generator for the stream `derive_key(seed, tags)`.
    pub fn stream(seed: u64, tags: &[u64]) -> Self {
        Self::new(derive_key(seed, tags))
    }

    /// Output at an arbitrary counter position, independent of the current state.
    #[inline]
    pub fn at(&self, counter: u64) -> u64 {
        mix64(
            self.key
                .wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)),
        )
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Uniform double in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        let out = self.at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        out
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        for chunk in dst.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }
}
