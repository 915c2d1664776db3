//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream. The 256-bit key is expanded from the
//! 64-bit master seed with `rand_core`'s `seed_from_u64` (PCG32 expansion),
//! the 64-bit ChaCha stream number is the stream id, and the block counter
//! is the draw position. A draw is `next_u64() >> 11` scaled by `2^-53`, a
//! uniform double in `[0, 1)`.
//!
//! The algorithm is fixed: a given `(master_seed, stream_id, position)`
//! always yields the same value, independent of threading.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    master_seed: u64,
    stream_id: u64,
}

impl StreamRng {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(master_seed);
        inner.set_stream(stream_id);
        Self {
            inner,
            master_seed,
            stream_id,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Jumps to draw number `position` (in 64-bit words) of this stream.
    pub fn seek(&mut self, position: u64) {
        // word_pos counts 32-bit words
        self.inner.set_word_pos(u128::from(position) * 2);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}
