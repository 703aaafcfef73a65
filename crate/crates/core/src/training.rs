//! Minimization of the empirical objective
//!
//! ```text
//! L(theta) = mean_n log c(x0_n) - mean_m log v(x1_m)
//! ```
//!
//! over the raw parameters `(log alpha, r, log s)` with analytic gradients and
//! Adam. Minibatches are drawn uniformly with replacement at every step.

use web_time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marginal::seed_means;
use crate::math::{softmax_in_place, LN_2PI};
use crate::potential::MixturePotential;
use crate::rng::seeded;
use crate::samples::SampleSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub n_components: usize,
    pub learning_rate: f64,
    pub batch_size_0: usize,
    pub batch_size_1: usize,
    pub n_iters: usize,
    pub seed: u64,
    pub init_scale: f64,
    pub init_means: MeanInit,
    pub eval_every: usize,
}

/// How the initial component means are picked from the target samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanInit {
    /// Uniform draws with replacement.
    #[default]
    Uniform,
    /// k-means++ draws, which spread the means over separated clusters.
    Spread,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            n_components: 10,
            learning_rate: 1e-2,
            batch_size_0: 128,
            batch_size_1: 128,
            n_iters: 10_000,
            seed: 0,
            init_scale: 0.1,
            init_means: MeanInit::Uniform,
            eval_every: 1_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_components", self.n_components),
            ("batch_size_0", self.batch_size_0),
            ("batch_size_1", self.batch_size_1),
            ("n_iters", self.n_iters),
            ("eval_every", self.eval_every),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        let positives = [
            ("epsilon", self.epsilon),
            ("learning_rate", self.learning_rate),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Flat gradient in the raw-parameter layout `[log_weights | means | log_scales]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// One entry of the loss trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub iteration: usize,
    pub loss: f64,
    pub wallclock_ms: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<(String, f64)>,
}

impl TrainReport {
    pub fn csv_header() -> &'static str {
        "iter,loss,wallclock_ms"
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.3}",
            self.iteration, self.loss, self.wallclock_ms
        )
    }
}

/// Log-weights uniform, means drawn with replacement from the target rows,
/// log-scales `log(init_scale)`.
pub fn init_params<R: Rng + ?Sized>(
    config: &SolverConfig,
    target: &SampleSet,
    rng: &mut R,
) -> Result<MixturePotential> {
    config.validate()?;
    let (k, d) = (config.n_components, target.dim());
    let means = match config.init_means {
        MeanInit::Uniform => (0..k)
            .flat_map(|_| target.row(rng.random_range(0..target.len())).to_vec())
            .collect(),
        MeanInit::Spread => seed_means(target, k, rng),
    };
    MixturePotential::new(
        d,
        config.epsilon,
        vec![-(k as f64).ln(); k],
        means,
        vec![config.init_scale.ln(); k * d],
    )
}

fn check_batches(pot: &MixturePotential, b0: &SampleSet, b1: &SampleSet) -> Result<()> {
    b0.check_dim(pot.dim())?;
    b1.check_dim(pot.dim())
}

/// Empirical objective on the given batches.
pub fn empirical_loss(
    pot: &MixturePotential,
    batch0: &SampleSet,
    batch1: &SampleSet,
) -> Result<f64> {
    check_batches(pot, batch0, batch1)?;
    let c: f64 = batch0
        .rows()
        .map(|x| pot.log_norm_unchecked(x))
        .sum::<f64>()
        / batch0.len() as f64;
    let v: f64 = batch1.rows().map(|x| pot.log_v_unchecked(x)).sum::<f64>() / batch1.len() as f64;
    let loss = c - v;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss {
            iteration: 0,
            value: loss,
        });
    }
    Ok(loss)
}

/// Analytic gradient of [`empirical_loss`] with respect to the raw parameters.
pub fn loss_gradient(
    pot: &MixturePotential,
    batch0: &SampleSet,
    batch1: &SampleSet,
) -> Result<GradientVector> {
    Ok(loss_and_gradient(
        pot,
        batch0.rows(),
        batch1.rows(),
        batch0.len(),
        batch1.len(),
    )?
    .1)
}

/// Loss and gradient in one pass over row iterators.
pub(crate) fn loss_and_gradient<'a>(
    pot: &MixturePotential,
    rows0: impl Iterator<Item = &'a [f64]>,
    rows1: impl Iterator<Item = &'a [f64]>,
    n0: usize,
    n1: usize,
) -> Result<(f64, GradientVector)> {
    let (k, d) = (pot.n_components(), pot.dim());
    let eps = pot.epsilon();
    let kd = k * d;
    let scales: Vec<f64> = pot.log_scales().iter().map(|l| l.exp()).collect();
    let means = pot.means();
    let lw = pot.log_weights();

    let mut grad = vec![0.0; k + 2 * kd];
    let (g_w, rest) = grad.split_at_mut(k);
    let (g_r, g_l) = rest.split_at_mut(kd);
    let mut w = vec![0.0; k];

    // + mean log c(x0): weights alpha~_k(x0)
    let inv0 = 1.0 / n0 as f64;
    let mut sum_c = 0.0;
    for x in rows0 {
        let half_inv_eps = 0.5 / eps;
        for c in 0..k {
            let (s, r) = (&scales[c * d..(c + 1) * d], &means[c * d..(c + 1) * d]);
            let mut q = 0.0;
            for j in 0..d {
                q += (s[j] * x[j] + 2.0 * r[j]) * x[j];
            }
            w[c] = lw[c] + q * half_inv_eps;
        }
        sum_c += softmax_in_place(&mut w);
        for c in 0..k {
            let wc = w[c] * inv0;
            if wc == 0.0 {
                continue;
            }
            g_w[c] += wc;
            for j in 0..d {
                let i = c * d + j;
                g_r[i] += wc * x[j] / eps;
                g_l[i] += wc * scales[i] * x[j] * x[j] / (2.0 * eps);
            }
        }
    }

    // - mean log v(x1): component responsibilities
    let inv1 = 1.0 / n1 as f64;
    let inv_var: Vec<f64> = scales.iter().map(|s| 1.0 / (eps * s)).collect();
    let ln_eps = eps.ln();
    let comp_const: Vec<f64> = (0..k)
        .map(|c| {
            let ls: f64 = pot.log_scale(c).iter().sum();
            lw[c] - 0.5 * (d as f64 * (LN_2PI + ln_eps) + ls)
        })
        .collect();
    let mut sum_v = 0.0;
    for x in rows1 {
        for c in 0..k {
            let (r, iv) = (&means[c * d..(c + 1) * d], &inv_var[c * d..(c + 1) * d]);
            let mut quad = 0.0;
            for j in 0..d {
                let diff = x[j] - r[j];
                quad += diff * diff * iv[j];
            }
            w[c] = comp_const[c] - 0.5 * quad;
        }
        sum_v += softmax_in_place(&mut w);
        for c in 0..k {
            let wc = w[c] * inv1;
            if wc == 0.0 {
                continue;
            }
            g_w[c] -= wc;
            for j in 0..d {
                let i = c * d + j;
                let diff = x[j] - means[i];
                let z = diff * inv_var[i];
                g_r[i] -= wc * z;
                g_l[i] -= wc * (0.5 * diff * z - 0.5);
            }
        }
    }

    let loss = sum_c * inv0 - sum_v * inv1;
    if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss {
            iteration: 0,
            value: loss,
        });
    }
    Ok((loss, GradientVector(grad)))
}

/// Adam with bias correction; `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &GradientVector, lr: f64) {
        let g = grad.as_slice();
        assert_eq!(params.len(), g.len(), "gradient length mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

/// Final parameters plus the per-iteration trace.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub potential: MixturePotential,
    pub trace: Vec<TrainReport>,
}

/// Runs `config.n_iters` Adam steps; deterministic given `config.seed`.
pub fn train(config: &SolverConfig, x0: &SampleSet, x1: &SampleSet) -> Result<TrainOutcome> {
    train_with_hook(config, x0, x1, |_, _| Ok(Vec::new()))
}

/// Like [`train`], calling `hook(iteration, potential)` every `eval_every`
/// steps and after the last one. Metrics returned by the hook are attached to
/// that iteration's report.
pub fn train_with_hook<F>(
    config: &SolverConfig,
    x0: &SampleSet,
    x1: &SampleSet,
    mut hook: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, &MixturePotential) -> Result<Vec<(String, f64)>>,
{
    config.validate()?;
    x1.check_dim(x0.dim())?;
    let mut rng = seeded(config.seed);
    let mut pot = init_params(config, x1, &mut rng)?;
    let mut params = pot.to_flat();
    let mut adam = Adam::new(params.len());
    let mut trace = Vec::with_capacity(config.n_iters);
    let start = Instant::now();
    let (b0, b1) = (config.batch_size_0, config.batch_size_1);
    let mut idx0 = vec![0usize; b0];
    let mut idx1 = vec![0usize; b1];

    for iteration in 1..=config.n_iters {
        idx0.iter_mut()
            .for_each(|i| *i = rng.random_range(0..x0.len()));
        idx1.iter_mut()
            .for_each(|i| *i = rng.random_range(0..x1.len()));
        let (loss, grad) = loss_and_gradient(
            &pot,
            idx0.iter().map(|&i| x0.row(i)),
            idx1.iter().map(|&i| x1.row(i)),
            b0,
            b1,
        )
        .map_err(|e| with_iteration(e, iteration))?;
        adam.step(&mut params, &grad, config.learning_rate);
        pot = pot.with_flat(&params).map_err(|e| match e {
            Error::NonFinite(_) => Error::NonFiniteLoss {
                iteration,
                value: f64::NAN,
            },
            other => other,
        })?;
        let mut report = TrainReport {
            iteration,
            loss,
            wallclock_ms: start.elapsed().as_secs_f64() * 1e3,
            metrics: Vec::new(),
        };
        if iteration % config.eval_every == 0 || iteration == config.n_iters {
            report.metrics = hook(iteration, &pot)?;
        }
        trace.push(report);
    }
    Ok(TrainOutcome {
        potential: pot,
        trace,
    })
}

fn with_iteration(e: Error, iteration: usize) -> Error {
    match e {
        Error::NonFiniteLoss { value, .. } => Error::NonFiniteLoss { iteration, value },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;

    fn single(x: f64) -> SampleSet {
        SampleSet::from_rows(&[vec![x]]).unwrap()
    }

    #[test]
    fn init_follows_defaults() {
        let cfg = SolverConfig {
            n_components: 3,
            init_scale: 0.1,
            ..SolverConfig::default()
        };
        let target =
            SampleSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let p = init_params(&cfg, &target, &mut seeded(4)).unwrap();
        assert!(p.log_weights().iter().all(|&w| w == (1.0f64 / 3.0).ln()));
        assert!(p.log_scales().iter().all(|&l| l == 0.1f64.ln()));
        for k in 0..3 {
            assert!(target.rows().any(|r| r == p.mean(k)));
        }
        let q = init_params(&cfg, &target, &mut seeded(4)).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn loss_at_origin() {
        let p = MixturePotential::standard(1, 1.0).unwrap();
        let l = empirical_loss(&p, &single(0.0), &single(0.0)).unwrap();
        assert!((l - 0.5 * LN_2PI).abs() < 1e-15);
        assert!((l - 0.91894).abs() < 1e-5);
    }

    #[test]
    fn loss_invariant_to_weight_scaling() {
        let mut rng = seeded(2);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| vec![standard_normal(&mut rng), standard_normal(&mut rng)])
            .collect();
        let b = SampleSet::from_rows(&rows).unwrap();
        let p = MixturePotential::new(
            2,
            0.5,
            vec![0.2, -1.0],
            vec![0.5, 0.1, -0.3, 1.0],
            vec![-0.5, 0.2, 0.0, -1.0],
        )
        .unwrap();
        let l0 = empirical_loss(&p, &b, &b).unwrap();
        let l1 = empirical_loss(&p.shift_log_weights(3.7).unwrap(), &b, &b).unwrap();
        assert!((l0 - l1).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = MixturePotential::standard(2, 1.0).unwrap();
        assert!(empirical_loss(&p, &single(0.0), &single(0.0)).is_err());
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut adam = Adam::new(3);
        let mut params = vec![1.0, 1.0, 1.0];
        adam.step(&mut params, &GradientVector(vec![2.5, -1e-3, 0.0]), 0.1);
        assert!((params[0] - 0.9).abs() < 1e-8);
        assert!((params[1] - 1.1).abs() < 1e-5);
        assert_eq!(params[2], 1.0);
    }

    #[test]
    fn adam_zero_gradient_is_noop() {
        let mut adam = Adam::new(2);
        let mut params = vec![0.3, -0.7];
        for _ in 0..10 {
            adam.step(&mut params, &GradientVector(vec![0.0, 0.0]), 1.0);
        }
        assert_eq!(params, vec![0.3, -0.7]);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = SolverConfig {
            batch_size_0: 0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            epsilon: -1.0,
            ..SolverConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn non_finite_loss_reports_iteration() {
        let cfg = SolverConfig {
            epsilon: 1e-300,
            n_components: 2,
            n_iters: 3,
            ..SolverConfig::default()
        };
        let x = SampleSet::from_rows(&[vec![1e10], vec![-1e10]]).unwrap();
        match train(&cfg, &x, &x) {
            Err(Error::NonFiniteLoss { iteration, .. }) => assert_eq!(iteration, 1),
            other => panic!("expected non-finite loss, got {other:?}"),
        }
    }
}
