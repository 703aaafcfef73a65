//! Gaussian-mixture parameterization of the adjusted Schrödinger potential
//! and the closed-form conditional plans it induces.
//!
//! The potential is the unnormalized mixture
//!
//! ```text
//! v(x1) = sum_k alpha_k N(x1 | r_k, eps * S_k),   S_k = diag(exp(log_scales_k))
//! ```
//!
//! and the conditional plan `pi(x1 | x0) ∝ exp(<x0, x1> / eps) v(x1)` is again
//! a Gaussian mixture with component weights
//! `log alpha_k + (x0' S_k x0 + 2 r_k' x0) / (2 eps)`, means `r_k + S_k x0` and
//! covariances `eps S_k`. Everything is evaluated in the log domain.

use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, softmax_in_place, LN_2PI};
use crate::rng::standard_normal;
use crate::samples::SampleSet;

/// Learnable parameters of `v` together with the volatility `eps`.
///
/// Serializes to the checkpoint layout
/// `{dim, n_components, epsilon, log_weights, means, log_scales}` with
/// `means` and `log_scales` as lists of `dim`-long rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CheckpointRepr", into = "CheckpointRepr")]
pub struct MixturePotential {
    dim: usize,
    n_components: usize,
    epsilon: f64,
    log_weights: Vec<f64>,
    means: Vec<f64>,
    log_scales: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRepr {
    dim: usize,
    n_components: usize,
    epsilon: f64,
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    log_scales: Vec<Vec<f64>>,
}

impl From<MixturePotential> for CheckpointRepr {
    fn from(p: MixturePotential) -> Self {
        let rows = |v: &[f64]| v.chunks_exact(p.dim).map(<[f64]>::to_vec).collect();
        CheckpointRepr {
            dim: p.dim,
            n_components: p.n_components,
            epsilon: p.epsilon,
            means: rows(&p.means),
            log_scales: rows(&p.log_scales),
            log_weights: p.log_weights,
        }
    }
}

impl TryFrom<CheckpointRepr> for MixturePotential {
    type Error = Error;

    fn try_from(r: CheckpointRepr) -> Result<Self> {
        for row in r.means.iter().chain(&r.log_scales) {
            if row.len() != r.dim {
                return Err(Error::DimensionMismatch {
                    expected: r.dim,
                    got: row.len(),
                });
            }
        }
        if r.means.len() != r.n_components || r.log_scales.len() != r.n_components {
            return Err(Error::invalid(
                "checkpoint row count differs from n_components",
            ));
        }
        MixturePotential::new(
            r.dim,
            r.epsilon,
            r.log_weights,
            r.means.concat(),
            r.log_scales.concat(),
        )
    }
}

impl MixturePotential {
    /// `means` and `log_scales` are row-major `K x dim`.
    pub fn new(
        dim: usize,
        epsilon: f64,
        log_weights: Vec<f64>,
        means: Vec<f64>,
        log_scales: Vec<f64>,
    ) -> Result<Self> {
        let k = log_weights.len();
        if dim == 0 || k == 0 {
            return Err(Error::invalid("dim and n_components must be positive"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid(format!(
                "epsilon must be positive, got {epsilon}"
            )));
        }
        for (name, len) in [("means", means.len()), ("log_scales", log_scales.len())] {
            if len != k * dim {
                return Err(Error::invalid(format!(
                    "{name} has {len} entries, expected {}",
                    k * dim
                )));
            }
        }
        if log_weights
            .iter()
            .chain(&means)
            .chain(&log_scales)
            .any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("potential parameters"));
        }
        Ok(Self {
            dim,
            n_components: k,
            epsilon,
            log_weights,
            means,
            log_scales,
        })
    }

    /// One component, `alpha = 1`, `r = 0`, `S = I`.
    pub fn standard(dim: usize, epsilon: f64) -> Result<Self> {
        Self::new(dim, epsilon, vec![0.0], vec![0.0; dim], vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn log_scales(&self) -> &[f64] {
        &self.log_scales
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn log_scale(&self, k: usize) -> &[f64] {
        &self.log_scales[k * self.dim..(k + 1) * self.dim]
    }

    /// Number of raw (optimizer-facing) parameters, `K (1 + 2D)`.
    pub fn n_params(&self) -> usize {
        self.n_components * (1 + 2 * self.dim)
    }

    /// Raw parameters laid out as `[log_weights | means | log_scales]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        out.extend_from_slice(&self.log_weights);
        out.extend_from_slice(&self.means);
        out.extend_from_slice(&self.log_scales);
        out
    }

    /// Inverse of [`to_flat`](Self::to_flat), keeping `dim`, `K` and `eps`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: flat.len(),
            });
        }
        let k = self.n_components;
        let kd = k * self.dim;
        Self::new(
            self.dim,
            self.epsilon,
            flat[..k].to_vec(),
            flat[k..k + kd].to_vec(),
            flat[k + kd..].to_vec(),
        )
    }

    /// Same potential at a different volatility.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(
            self.dim,
            epsilon,
            self.log_weights.clone(),
            self.means.clone(),
            self.log_scales.clone(),
        )
    }

    /// Multiplies every `alpha_k` by `exp(shift)`.
    pub fn shift_log_weights(&self, shift: f64) -> Result<Self> {
        let lw = self.log_weights.iter().map(|w| w + shift).collect();
        Self::new(
            self.dim,
            self.epsilon,
            lw,
            self.means.clone(),
            self.log_scales.clone(),
        )
    }

    fn check_point(&self, x: &[f64], what: &'static str) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    /// Log density of component `k` of `v` at `x1`, without `alpha_k`.
    pub(crate) fn component_log_normal(&self, k: usize, x1: &[f64]) -> f64 {
        let ln_eps = self.epsilon.ln();
        let mut acc = 0.0;
        for ((&x, &r), &ls) in x1.iter().zip(self.mean(k)).zip(self.log_scale(k)) {
            let var = self.epsilon * ls.exp();
            acc -= 0.5 * (LN_2PI + ln_eps + ls) + (x - r) * (x - r) / (2.0 * var);
        }
        acc
    }

    /// `log v(x1)`.
    pub fn log_v(&self, x1: &[f64]) -> Result<f64> {
        self.check_point(x1, "x1")?;
        Ok(self.log_v_unchecked(x1))
    }

    pub(crate) fn log_v_unchecked(&self, x1: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.n_components)
            .map(|k| self.log_weights[k] + self.component_log_normal(k, x1))
            .collect();
        log_sum_exp(&terms)
    }

    /// Unnormalized log weight `log alpha~_k(x0)` of component `k`.
    pub(crate) fn tilde_log_weight(&self, k: usize, x0: &[f64]) -> f64 {
        let mut quad = 0.0;
        for ((&x, &r), &ls) in x0.iter().zip(self.mean(k)).zip(self.log_scale(k)) {
            quad += ls.exp() * x * x + 2.0 * r * x;
        }
        self.log_weights[k] + quad / (2.0 * self.epsilon)
    }

    /// `log c(x0)`, the log normalizer of the conditional plan.
    pub fn log_norm(&self, x0: &[f64]) -> Result<f64> {
        self.check_point(x0, "x0")?;
        Ok(self.log_norm_unchecked(x0))
    }

    pub(crate) fn log_norm_unchecked(&self, x0: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.n_components)
            .map(|k| self.tilde_log_weight(k, x0))
            .collect();
        log_sum_exp(&terms)
    }

    /// The Gaussian mixture `pi(. | x0)`.
    pub fn conditional_plan(&self, x0: &[f64]) -> Result<ConditionalMixture> {
        self.check_point(x0, "x0")?;
        Ok(self.conditional_plan_unchecked(x0))
    }

    pub(crate) fn conditional_plan_unchecked(&self, x0: &[f64]) -> ConditionalMixture {
        let (k, d) = (self.n_components, self.dim);
        let mut log_tilde_weights = Vec::with_capacity(k);
        let mut cond_means = Vec::with_capacity(k * d);
        let mut cov_diags = Vec::with_capacity(k * d);
        for c in 0..k {
            log_tilde_weights.push(self.tilde_log_weight(c, x0));
            for ((&x, &r), &ls) in x0.iter().zip(self.mean(c)).zip(self.log_scale(c)) {
                let s = ls.exp();
                cond_means.push(r + s * x);
                cov_diags.push(self.epsilon * s);
            }
        }
        let log_norm = log_sum_exp(&log_tilde_weights);
        ConditionalMixture {
            dim: d,
            log_tilde_weights,
            cond_means,
            cov_diags,
            log_norm,
        }
    }

    /// `log pi(x1 | x0)`.
    pub fn log_pi_cond(&self, x0: &[f64], x1: &[f64]) -> Result<f64> {
        self.check_point(x1, "x1")?;
        Ok(self.conditional_plan(x0)?.log_density(x1))
    }

    /// `n` i.i.d. draws from `pi(. | x0)`.
    pub fn sample_conditional<R: Rng + ?Sized>(
        &self,
        x0: &[f64],
        n: usize,
        rng: &mut R,
    ) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::invalid("sample count must be at least 1"));
        }
        let plan = self.conditional_plan(x0)?;
        let mut data = vec![0.0; n * self.dim];
        for row in data.chunks_exact_mut(self.dim) {
            plan.sample_into(rng, row);
        }
        SampleSet::new(n, self.dim, data)
    }

    /// One draw from `pi(. | x0)` for every row of `x0s`.
    pub fn sample_conditional_batch<R: Rng + ?Sized>(
        &self,
        x0s: &SampleSet,
        rng: &mut R,
    ) -> Result<SampleSet> {
        x0s.check_dim(self.dim)?;
        let mut data = vec![0.0; x0s.len() * self.dim];
        for (x0, out) in x0s.rows().zip(data.chunks_exact_mut(self.dim)) {
            self.conditional_plan_unchecked(x0).sample_into(rng, out);
        }
        SampleSet::new(x0s.len(), self.dim, data)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// The conditional plan `pi(. | x0)`: a Gaussian mixture with diagonal
/// covariances and unnormalized log weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalMixture {
    dim: usize,
    pub log_tilde_weights: Vec<f64>,
    /// `r_k + S_k x0`, row-major `K x dim`.
    pub cond_means: Vec<f64>,
    /// Diagonal of `eps S_k`, row-major `K x dim`.
    pub cov_diags: Vec<f64>,
    /// `log c(x0) = logsumexp(log_tilde_weights)`.
    pub log_norm: f64,
}

impl ConditionalMixture {
    /// Builds a mixture from explicit parts; `log_norm` is recomputed.
    pub fn from_parts(
        dim: usize,
        log_tilde_weights: Vec<f64>,
        cond_means: Vec<f64>,
        cov_diags: Vec<f64>,
    ) -> Result<Self> {
        let k = log_tilde_weights.len();
        if k == 0 || cond_means.len() != k * dim || cov_diags.len() != k * dim {
            return Err(Error::invalid("inconsistent conditional mixture shapes"));
        }
        if cov_diags.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::invalid("covariance diagonals must be positive"));
        }
        let log_norm = log_sum_exp(&log_tilde_weights);
        Ok(Self {
            dim,
            log_tilde_weights,
            cond_means,
            cov_diags,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.log_tilde_weights.len()
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.cond_means[k * self.dim..(k + 1) * self.dim]
    }

    pub fn cov_diag(&self, k: usize) -> &[f64] {
        &self.cov_diags[k * self.dim..(k + 1) * self.dim]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_tilde_weights
            .iter()
            .map(|w| (w - self.log_norm).exp())
            .collect()
    }

    pub fn log_density(&self, x1: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| {
                let mut lp = self.log_tilde_weights[k];
                for ((&x, &m), &v) in x1.iter().zip(self.mean(k)).zip(self.cov_diag(k)) {
                    lp -= 0.5 * (LN_2PI + v.ln()) + (x - m) * (x - m) / (2.0 * v);
                }
                lp
            })
            .collect();
        log_sum_exp(&terms) - self.log_norm
    }

    /// Component index drawn from the normalized weights.
    pub fn sample_component<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let last = self.n_components() - 1;
        for k in 0..last {
            acc += (self.log_tilde_weights[k] - self.log_norm).exp();
            if u < acc {
                return k;
            }
        }
        last
    }

    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let k = self.sample_component(rng);
        for ((o, &m), &v) in out.iter_mut().zip(self.mean(k)).zip(self.cov_diag(k)) {
            *o = m + v.sqrt() * standard_normal(rng);
        }
    }

    /// Exact mean and full covariance of the mixture:
    /// weighted within-component covariance plus the scatter of the means.
    pub fn moments(&self) -> (Vec<f64>, DMatrix<f64>) {
        let d = self.dim;
        let mut w = self.log_tilde_weights.clone();
        softmax_in_place(&mut w);
        let mut mean = vec![0.0; d];
        for (k, &wk) in w.iter().enumerate() {
            for (m, &mk) in mean.iter_mut().zip(self.mean(k)) {
                *m += wk * mk;
            }
        }
        let mut cov = DMatrix::zeros(d, d);
        for (k, &wk) in w.iter().enumerate() {
            let mk = self.mean(k);
            let vk = self.cov_diag(k);
            for i in 0..d {
                let di = mk[i] - mean[i];
                cov[(i, i)] += wk * vk[i];
                for j in 0..d {
                    cov[(i, j)] += wk * di * (mk[j] - mean[j]);
                }
            }
        }
        (mean, cov)
    }
}
