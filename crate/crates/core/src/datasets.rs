//! Synthetic datasets.

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::standard_normal;
use crate::samples::SampleSet;

pub const SWISS_ROLL_NOISE: f64 = 0.1;

/// 2D swiss roll: `t = 1.5 pi (1 + 2u)`, point `(t cos t, t sin t) / 7.5`
/// plus isotropic Gaussian noise with standard deviation
/// [`SWISS_ROLL_NOISE`].
pub fn swiss_roll<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SampleSet> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let mut data = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let u: f64 = rng.random();
        let t = 1.5 * PI * (1.0 + 2.0 * u);
        data.push(t * t.cos() / 7.5 + SWISS_ROLL_NOISE * standard_normal(rng));
        data.push(t * t.sin() / 7.5 + SWISS_ROLL_NOISE * standard_normal(rng));
    }
    SampleSet::new(n, 2, data)
}

/// `n` draws of a standard Gaussian in `dim` dimensions.
pub fn standard_gaussian<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Result<SampleSet> {
    let data = (0..n * dim).map(|_| standard_normal(rng)).collect();
    SampleSet::new(n, dim, data)
}
