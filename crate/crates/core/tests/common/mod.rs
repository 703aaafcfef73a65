#![allow(dead_code)]

pub mod oracles;
pub mod quadrature;

use mixbridge::rng::standard_normal;
use mixbridge::{MixturePotential, SampleSet};
use rand::Rng;

/// Random potential with log-weights ~ N(0, 1), means ~ N(0, mean_sd^2) and
/// scales log-uniform in `[0.2, 2]`.
pub fn random_potential<R: Rng>(
    rng: &mut R,
    dim: usize,
    k: usize,
    eps: f64,
    mean_sd: f64,
) -> MixturePotential {
    let lw = (0..k).map(|_| standard_normal(rng)).collect();
    let means = (0..k * dim)
        .map(|_| mean_sd * standard_normal(rng))
        .collect();
    let ls = (0..k * dim)
        .map(|_| rng.random_range(0.2f64.ln()..2f64.ln()))
        .collect();
    MixturePotential::new(dim, eps, lw, means, ls).unwrap()
}

pub fn random_samples<R: Rng>(rng: &mut R, n: usize, dim: usize, sd: f64) -> SampleSet {
    let data = (0..n * dim).map(|_| sd * standard_normal(rng)).collect();
    SampleSet::new(n, dim, data).unwrap()
}

/// Integration window covering every Gaussian bump `(center, sd)` to
/// `12` standard deviations.
pub fn window(bumps: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    bumps
        .into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (c, s)| {
            (lo.min(c - 12.0 * s), hi.max(c + 12.0 * s))
        })
}

/// Relative error with a floor on the denominator.
pub fn rel_err(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor)
}

/// Five-sigma band check.
pub fn within_sigma(got: f64, want: f64, sigma: f64, k: f64) -> bool {
    (got - want).abs() <= k * sigma
}
