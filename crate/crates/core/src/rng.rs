//! Seedable, splittable random source shared by every stochastic operation.

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type HawkesRng = ChaCha8Rng;

/// A family of independent generators derived from one 64-bit seed.
///
/// Stream `k` of a family is the ChaCha stream `k` under the family key, so
/// replications can be handed out to workers in any order and still reproduce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedFamily {
    seed: u64,
}

impl SeedFamily {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, k: u64) -> HawkesRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }

    /// A sub-family whose streams do not overlap the parent's.
    pub fn child(&self, k: u64) -> SeedFamily {
        let mut rng = self.stream(u64::MAX - k);
        SeedFamily::new(rng.random())
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}
