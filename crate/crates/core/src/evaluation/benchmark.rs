use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::MixturePotential;
use crate::rng::{standard_normal, stream};
use crate::samples::SampleSet;

use super::bures::{bw2_uvp, bw2_uvp_moments};
use super::McEstimate;

pub const BENCHMARK_MEAN_RADIUS: f64 = 3.0;
pub const BENCHMARK_MIN_SCALE: f64 = 0.05;
pub const BENCHMARK_MAX_SCALE: f64 = 0.5;

/// Source law `p0` of a benchmark pair.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSpec {
    #[default]
    StandardGaussian,
    /// Independent coordinates `mean[d] + std[d] * z`.
    DiagonalGaussian { mean: Vec<f64>, std: Vec<f64> },
}

impl SourceSpec {
    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, n: usize, rng: &mut R) -> Result<SampleSet> {
        if let SourceSpec::DiagonalGaussian { mean, std } = self {
            if mean.len() != dim || std.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: mean.len().min(std.len()),
                });
            }
        }
        let mut data = vec![0.0; n * dim];
        for row in data.chunks_exact_mut(dim) {
            for (j, v) in row.iter_mut().enumerate() {
                let z = standard_normal(rng);
                *v = match self {
                    SourceSpec::StandardGaussian => z,
                    SourceSpec::DiagonalGaussian { mean, std } => mean[j] + std[j] * z,
                };
            }
        }
        SampleSet::new(n, dim, data)
    }
}

/// A source sample and its exact image under a known plan.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthPair {
    pub potential: MixturePotential,
    pub source: SourceSpec,
    pub x0: SampleSet,
    pub x1: SampleSet,
}

/// Random potential for benchmarking: means uniform in the ball of radius
/// [`BENCHMARK_MEAN_RADIUS`], log scales uniform between the logs of
/// [`BENCHMARK_MIN_SCALE`] and [`BENCHMARK_MAX_SCALE`], weights from a flat
/// Dirichlet.
pub fn random_benchmark_potential<R: Rng + ?Sized>(
    dim: usize,
    k: usize,
    epsilon: f64,
    rng: &mut R,
) -> Result<MixturePotential> {
    if dim == 0 || k == 0 {
        return Err(Error::invalid("dim and k must be positive"));
    }
    let gammas: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = gammas.iter().sum();
    let log_weights = gammas.iter().map(|g| (g / total).ln()).collect();

    let mut means = Vec::with_capacity(k * dim);
    for _ in 0..k {
        let dir: Vec<f64> = (0..dim).map(|_| standard_normal(rng)).collect();
        let norm = dir
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        let u: f64 = rng.random();
        let radius = BENCHMARK_MEAN_RADIUS * u.powf(1.0 / dim as f64);
        means.extend(dir.iter().map(|v| v / norm * radius));
    }
    let (lo, hi) = (BENCHMARK_MIN_SCALE.ln(), BENCHMARK_MAX_SCALE.ln());
    let log_scales = (0..k * dim).map(|_| rng.random_range(lo..hi)).collect();
    MixturePotential::new(dim, epsilon, log_weights, means, log_scales)
}

/// Draws a random ground-truth potential, `n_pairs` source points and their
/// conditional images. The plan of the returned potential is by
/// construction the entropic OT plan between the source and the law of `x1`.
pub fn make_ground_truth_pair<R: Rng + ?Sized>(
    dim: usize,
    k: usize,
    epsilon: f64,
    source: SourceSpec,
    n_pairs: usize,
    rng: &mut R,
) -> Result<GroundTruthPair> {
    if n_pairs == 0 {
        return Err(Error::invalid("n_pairs must be at least 1"));
    }
    let potential = random_benchmark_potential(dim, k, epsilon, rng)?;
    let x0 = source.sample(dim, n_pairs, rng)?;
    let x1 = potential.sample_conditional_batch(&x0, rng)?;
    Ok(GroundTruthPair {
        potential,
        source,
        x0,
        x1,
    })
}

/// How conditional moments of the evaluated model are obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentMode {
    /// Closed-form mixture moments for both models.
    Exact,
    /// Gaussian fits of `n_cond` draws from each conditional.
    Sampled { n_cond: usize },
}

/// Conditional BW2-UVP of `pot` against `truth`, averaged (unweighted) over
/// the rows of `x0`. The standard error is over start points.
pub fn cbw2_uvp_at<R: Rng + ?Sized>(
    pot: &MixturePotential,
    truth: &MixturePotential,
    x0: &SampleSet,
    mode: MomentMode,
    rng: &mut R,
) -> Result<McEstimate> {
    if pot.dim() != truth.dim() {
        return Err(Error::DimensionMismatch {
            expected: truth.dim(),
            got: pot.dim(),
        });
    }
    x0.check_dim(pot.dim())?;
    if let MomentMode::Sampled { n_cond } = mode {
        if n_cond <= pot.dim() {
            return Err(Error::invalid("n_cond must exceed the dimension"));
        }
    }
    let base: u64 = rng.random();
    let values: Vec<f64> = (0..x0.len())
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let x = x0.row(i);
            match mode {
                MomentMode::Exact => {
                    let (m, c) = pot.conditional_plan(x)?.moments();
                    let (mt, ct) = truth.conditional_plan(x)?.moments();
                    bw2_uvp_moments(&m, &c, &mt, &ct)
                }
                MomentMode::Sampled { n_cond } => {
                    let mut r = stream(base, i as u64);
                    let a = pot.sample_conditional(x, n_cond, &mut r)?;
                    let b = truth.sample_conditional(x, n_cond, &mut r)?;
                    bw2_uvp(&a, &b)
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_values(&values))
}

/// [`cbw2_uvp_at`] over `n_test_x0` fresh source draws of the pair.
pub fn cbw2_uvp<R: Rng + ?Sized>(
    pot: &MixturePotential,
    truth: &GroundTruthPair,
    n_test_x0: usize,
    mode: MomentMode,
    rng: &mut R,
) -> Result<McEstimate> {
    if n_test_x0 == 0 {
        return Err(Error::invalid("n_test_x0 must be at least 1"));
    }
    let x0 = truth.source.sample(truth.potential.dim(), n_test_x0, rng)?;
    cbw2_uvp_at(pot, &truth.potential, &x0, mode, rng)
}
