//! Seeded, counter-based random streams.
//!
//! Every stochastic routine that fans out over particles derives one
//! independent ChaCha stream per particle from a base seed, so serial and
//! parallel execution draw exactly the same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SbRng = ChaCha8Rng;

/// Root generator for a run.
pub fn seeded(seed: u64) -> SbRng {
    SbRng::seed_from_u64(seed)
}

/// Independent stream `index` under `seed`.
pub fn stream(seed: u64, index: u64) -> SbRng {
    let mut rng = SbRng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

pub fn fill_standard_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
}
