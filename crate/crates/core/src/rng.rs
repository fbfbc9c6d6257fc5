//! Explicitly threaded random state.
//!
//! Every stochastic operation in the crate takes `&mut RngState` and documents
//! how many uniform draws it consumes. Two runs that start from equal states and
//! make the same calls in the same order see the same numbers, which is what
//! makes the compositional algorithms comparable draw-for-draw with their
//! direct oracles.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Counter-based generator state (ChaCha8 keyed by seed, one stream per id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngState {
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream `stream` under the same seed.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    /// Next uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform draw in `[lo, hi)`. Consumes one draw.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index below `n`. Consumes one draw.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index over an empty range");
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Derive a fresh state from this one. Consumes one `u64`.
    pub fn split(&mut self) -> RngState {
        RngState::new(self.next_u64())
    }

    /// Number of 32-bit words consumed so far; handy for asserting draw counts.
    pub fn position(&self) -> u128 {
        self.inner.get_word_pos()
    }
}
