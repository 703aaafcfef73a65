use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::potential::MixturePotential;
use crate::rng::stream;

use super::benchmark::SourceSpec;
use super::McEstimate;

/// Monte-Carlo estimate of `E_{x0} KL(pi_a(. | x0) | pi_b(. | x0))`.
///
/// Draws `n_outer` start points from `source` and `n_inner` endpoints from
/// `pot_a` for each. The standard error is computed from the spread of the
/// per-start-point inner means.
pub fn kl_plan_mc<R: Rng + ?Sized>(
    pot_a: &MixturePotential,
    pot_b: &MixturePotential,
    source: &SourceSpec,
    n_outer: usize,
    n_inner: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if pot_a.dim() != pot_b.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot_a.dim(),
            got: pot_b.dim(),
        });
    }
    if pot_a.epsilon() != pot_b.epsilon() {
        return Err(Error::invalid("both plans must share epsilon"));
    }
    if n_outer < 2 || n_inner == 0 {
        return Err(Error::invalid("need n_outer >= 2 and n_inner >= 1"));
    }
    let x0 = source.sample(pot_a.dim(), n_outer, rng)?;
    let base: u64 = rng.random();
    let d = pot_a.dim();
    let inner: Vec<f64> = (0..n_outer)
        .into_par_iter()
        .map(|i| {
            let mut r = stream(base, i as u64);
            let x = x0.row(i);
            let ca = pot_a.conditional_plan(x)?;
            let cb = pot_b.conditional_plan(x)?;
            let mut y = vec![0.0; d];
            let mut acc = 0.0;
            for _ in 0..n_inner {
                ca.sample_into(&mut r, &mut y);
                acc += ca.log_density(&y) - cb.log_density(&y);
            }
            Ok(acc / n_inner as f64)
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_values(&inner))
}
