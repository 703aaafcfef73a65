//! Diagonal Gaussian mixture for the source marginal, fitted with EM, and the
//! full plan density `p(x0) pi(x1 | x0)` built on top of it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sq_dist, LN_2PI};
use crate::potential::MixturePotential;
use crate::samples::SampleSet;

/// Variance floor applied in the M-step.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Normalized diagonal Gaussian mixture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    pub dim: usize,
    pub weights: Vec<f64>,
    /// Row-major `K x dim`.
    pub means: Vec<f64>,
    /// Row-major `K x dim`.
    pub variances: Vec<f64>,
}

/// Result of [`fit_marginal_em`].
#[derive(Clone, Debug)]
pub struct EmFit {
    pub model: MarginalModel,
    /// Mean log-likelihood after each iteration (index 0 is the initial model).
    pub log_likelihood: Vec<f64>,
    /// Set when some variance hit [`VARIANCE_FLOOR`].
    pub clamped: bool,
}

impl MarginalModel {
    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k * self.dim..(k + 1) * self.dim]
    }

    fn component_log_pdfs(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let mut lp = self.weights[k].ln();
            for ((&xi, &m), &v) in x.iter().zip(self.mean(k)).zip(self.variance(k)) {
                lp -= 0.5 * (LN_2PI + v.ln()) + (xi - m) * (xi - m) / (2.0 * v);
            }
            *o = lp;
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.n_components()];
        self.component_log_pdfs(x, &mut buf);
        log_sum_exp(&buf)
    }

    pub fn mean_log_likelihood(&self, samples: &SampleSet) -> f64 {
        let mut buf = vec![0.0; self.n_components()];
        let total: f64 = samples
            .rows()
            .map(|x| {
                self.component_log_pdfs(x, &mut buf);
                log_sum_exp(&buf)
            })
            .sum();
        total / samples.len() as f64
    }
}

/// Standard EM for a diagonal-covariance mixture with `k` components.
///
/// Means are seeded k-means++ style (each new mean is a row drawn with
/// probability proportional to its squared distance from the nearest mean
/// chosen so far), variances start at the per-coordinate data variance and
/// weights uniform.
pub fn fit_marginal_em<R: Rng + ?Sized>(
    samples: &SampleSet,
    k: usize,
    iters: usize,
    rng: &mut R,
) -> Result<EmFit> {
    let (n, d) = (samples.len(), samples.dim());
    if k == 0 || n < k {
        return Err(Error::invalid(format!(
            "EM needs 1 <= k <= N, got k={k}, N={n}"
        )));
    }
    let global_mean = samples.mean();
    let mut global_var = vec![0.0; d];
    for x in samples.rows() {
        for j in 0..d {
            global_var[j] += (x[j] - global_mean[j]).powi(2) / n as f64;
        }
    }
    let mut clamped = false;
    for v in global_var.iter_mut() {
        if *v < VARIANCE_FLOOR {
            *v = VARIANCE_FLOOR;
            clamped = true;
        }
    }

    let mut model = MarginalModel {
        dim: d,
        weights: vec![1.0 / k as f64; k],
        means: seed_means(samples, k, rng),
        variances: global_var.repeat(k),
    };

    let mut resp = vec![0.0; n * k];
    let mut log_likelihood = vec![model.mean_log_likelihood(samples)];
    for _ in 0..iters {
        // E-step
        for (x, r) in samples.rows().zip(resp.chunks_exact_mut(k)) {
            model.component_log_pdfs(x, r);
            let lse = log_sum_exp(r);
            r.iter_mut().for_each(|v| *v = (*v - lse).exp());
        }
        // M-step
        let mut nk = vec![0.0; k];
        let mut means = vec![0.0; k * d];
        for (x, r) in samples.rows().zip(resp.chunks_exact(k)) {
            for c in 0..k {
                nk[c] += r[c];
                for j in 0..d {
                    means[c * d + j] += r[c] * x[j];
                }
            }
        }
        for c in 0..k {
            let denom = nk[c].max(f64::MIN_POSITIVE);
            for j in 0..d {
                means[c * d + j] /= denom;
            }
        }
        let mut vars = vec![0.0; k * d];
        for (x, r) in samples.rows().zip(resp.chunks_exact(k)) {
            for c in 0..k {
                for j in 0..d {
                    vars[c * d + j] += r[c] * (x[j] - means[c * d + j]).powi(2);
                }
            }
        }
        for c in 0..k {
            let denom = nk[c].max(f64::MIN_POSITIVE);
            for j in 0..d {
                let v = &mut vars[c * d + j];
                *v /= denom;
                if !(*v >= VARIANCE_FLOOR) {
                    *v = VARIANCE_FLOOR;
                    clamped = true;
                }
            }
        }
        let weights = nk
            .iter()
            .map(|&v| (v / n as f64).max(f64::MIN_POSITIVE))
            .collect();
        model = MarginalModel {
            dim: d,
            weights,
            means,
            variances: vars,
        };
        log_likelihood.push(model.mean_log_likelihood(samples));
    }
    Ok(EmFit {
        model,
        log_likelihood,
        clamped,
    })
}

/// k-means++ seeding: each new centre is a sample drawn with probability
/// proportional to its squared distance from the nearest centre so far.
pub(crate) fn seed_means<R: Rng + ?Sized>(samples: &SampleSet, k: usize, rng: &mut R) -> Vec<f64> {
    let n = samples.len();
    let mut means = samples.row(rng.random_range(0..n)).to_vec();
    let mut nearest: Vec<f64> = samples.rows().map(|x| sq_dist(x, &means)).collect();
    for _ in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            nearest
                .iter()
                .position(|&w| {
                    u -= w;
                    u < 0.0
                })
                .unwrap_or(n - 1)
        } else {
            rng.random_range(0..n)
        };
        let chosen = samples.row(pick).to_vec();
        for (w, x) in nearest.iter_mut().zip(samples.rows()) {
            *w = w.min(sq_dist(x, &chosen));
        }
        means.extend(chosen);
    }
    means
}

/// `log p(x0) + log pi(x1 | x0)`.
pub fn log_plan_density(
    marg: &MarginalModel,
    pot: &MixturePotential,
    x0: &[f64],
    x1: &[f64],
) -> Result<f64> {
    if marg.dim != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: marg.dim,
        });
    }
    Ok(marg.log_density(x0) + pot.log_pi_cond(x0, x1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, standard_normal};

    #[test]
    fn single_component_is_moment_match() {
        let mut rng = seeded(3);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| {
                vec![
                    1.0 + 2.0 * standard_normal(&mut rng),
                    -0.5 * standard_normal(&mut rng),
                ]
            })
            .collect();
        let s = SampleSet::from_rows(&rows).unwrap();
        let fit = fit_marginal_em(&s, 1, 5, &mut rng).unwrap();
        let mean = s.mean();
        for j in 0..2 {
            let var: f64 = s.rows().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / 500.0;
            assert!((fit.model.means[j] - mean[j]).abs() < 1e-12);
            assert!((fit.model.variances[j] - var).abs() < 1e-12);
        }
        assert_eq!(fit.model.weights, vec![1.0]);
    }

    #[test]
    fn log_likelihood_monotone() {
        let mut rng = seeded(11);
        let rows: Vec<Vec<f64>> = (0..600)
            .map(|i| {
                let c = [-3.0, 0.5, 4.0][i % 3];
                vec![
                    c + standard_normal(&mut rng),
                    0.3 * standard_normal(&mut rng) - c,
                ]
            })
            .collect();
        let s = SampleSet::from_rows(&rows).unwrap();
        let fit = fit_marginal_em(&s, 4, 60, &mut rng).unwrap();
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert!((fit.model.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_component_is_clamped() {
        let rows = vec![vec![2.0, 1.0], vec![2.0, -1.0], vec![2.0, 0.0]];
        let s = SampleSet::from_rows(&rows).unwrap();
        let fit = fit_marginal_em(&s, 1, 3, &mut seeded(0)).unwrap();
        assert!(fit.clamped);
        assert!(fit.model.variances.iter().all(|&v| v >= VARIANCE_FLOOR));
    }

    #[test]
    fn needs_enough_samples() {
        let s = SampleSet::from_rows(&[vec![0.0]]).unwrap();
        assert!(fit_marginal_em(&s, 2, 1, &mut seeded(0)).is_err());
    }
}
