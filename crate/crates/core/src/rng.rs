//! Explicit, splittable random state.
//!
//! Every stochastic routine takes a `&mut RngState`; nothing reads global
//! randomness. Parallel loops derive one independent stream per chunk with
//! [`RngState::stream`], so results do not depend on the worker count.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Default seed used by the command-line front end.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

#[derive(Debug, Clone)]
pub struct RngState {
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream `index` of the family keyed by `seed`.
    pub fn stream(seed: u64, index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(index);
        Self { inner }
    }

    /// Draws a fresh key from this state and returns an independent child.
    pub fn split(&mut self) -> Self {
        Self::from_seed(self.inner.next_u64())
    }

    /// Draws a key for a family of chunk streams (see [`RngState::stream`]).
    pub fn derive_key(&mut self) -> u64 {
        self.inner.next_u64()
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
