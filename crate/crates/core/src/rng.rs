//! Seeded sampling stream used by the stochastic estimators.
//!
//! Every draw comes from a ChaCha8 stream (a counter-based generator keyed by
//! a 64-bit seed), so a run is fully determined by its seed. Draw order per
//! step is fixed: component index first, then the refresh coin if any.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SampleStream {
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Uniform index in `0..n` from a single 64-bit draw (multiply-high,
    /// no rejection loop). The bias is at most `n / 2^64`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// One Bernoulli(p) draw from one uniform.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }
}

/// Seeded generator for data synthesis and shuffling.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
