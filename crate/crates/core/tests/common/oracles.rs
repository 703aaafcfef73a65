//! Independent reference computations: quadrature in one dimension, naive
//! exponential arithmetic, finite differences and a plain Adam.

use std::f64::consts::PI;

use mixbridge::{empirical_loss, MixturePotential, SampleSet};

use super::quadrature::log_integrate;
use super::window;

fn params_1d(pot: &MixturePotential) -> Vec<(f64, f64, f64)> {
    assert_eq!(pot.dim(), 1);
    (0..pot.n_components())
        .map(|k| {
            (
                pot.log_weights()[k],
                pot.mean(k)[0],
                pot.log_scale(k)[0].exp(),
            )
        })
        .collect()
}

/// `log v(x)` from the mixture formula, 1D.
fn log_v_1d(comps: &[(f64, f64, f64)], eps: f64, x: f64) -> f64 {
    let terms: Vec<f64> = comps
        .iter()
        .map(|&(lw, r, s)| lw - 0.5 * (2.0 * PI * eps * s).ln() - (x - r).powi(2) / (2.0 * eps * s))
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// `log int exp(x0 x1 / eps) v(x1) dx1` by quadrature.
pub fn log_norm_quadrature(pot: &MixturePotential, x0: f64) -> f64 {
    let eps = pot.epsilon();
    let comps = params_1d(pot);
    let (a, b) = window(
        comps
            .iter()
            .map(|&(_, r, s)| (r + s * x0, (eps * s).sqrt())),
    );
    log_integrate(
        |x1| x0 * x1 / eps + log_v_1d(&comps, eps, x1),
        a,
        b,
        1e-12,
        64,
    )
}

/// `eps d/dx log int N(x' | x, (1 - t) eps) exp(x'^2 / (2 eps)) v(x') dx'` by
/// quadrature and a central difference with step `h`.
pub fn drift_quadrature(pot: &MixturePotential, x: f64, t: f64, h: f64) -> f64 {
    let eps = pot.epsilon();
    let comps = params_1d(pot);
    let tau = 1.0 - t;
    let bumps: Vec<(f64, f64)> = comps
        .iter()
        .map(|&(_, r, s)| {
            let a = (t / tau + 1.0 / s) / eps;
            let h = x / (eps * tau) + r / (eps * s);
            (h / a, 1.0 / a.sqrt())
        })
        .collect();
    let (lo, hi) = window(bumps);
    let margin = 2.0 * h / tau + 1.0;
    let log_i = |xc: f64| {
        log_integrate(
            |xp| {
                -(xp - xc).powi(2) / (2.0 * tau * eps)
                    + xp * xp / (2.0 * eps)
                    + log_v_1d(&comps, eps, xp)
            },
            lo - margin,
            hi + margin,
            1e-13,
            64,
        )
    };
    eps * (log_i(x + h) - log_i(x - h)) / (2.0 * h)
}

/// Loss computed with plain exponentials (only sensible for moderate
/// epsilon and inputs).
pub fn naive_loss(pot: &MixturePotential, b0: &SampleSet, b1: &SampleSet) -> f64 {
    let (k, d, eps) = (pot.n_components(), pot.dim(), pot.epsilon());
    let mut c_sum = 0.0;
    for x in b0.rows() {
        let mut c = 0.0;
        for j in 0..k {
            let mut q = 0.0;
            for i in 0..d {
                q += pot.log_scale(j)[i].exp() * x[i] * x[i] + 2.0 * pot.mean(j)[i] * x[i];
            }
            c += pot.log_weights()[j].exp() * (q / (2.0 * eps)).exp();
        }
        c_sum += c.ln();
    }
    let mut v_sum = 0.0;
    for x in b1.rows() {
        let mut v = 0.0;
        for j in 0..k {
            let mut dens = 1.0;
            for i in 0..d {
                let var = eps * pot.log_scale(j)[i].exp();
                dens *= (-(x[i] - pot.mean(j)[i]).powi(2) / (2.0 * var)).exp()
                    / (2.0 * PI * var).sqrt();
            }
            v += pot.log_weights()[j].exp() * dens;
        }
        v_sum += v.ln();
    }
    c_sum / b0.len() as f64 - v_sum / b1.len() as f64
}

/// Central finite-difference gradient of the loss over the flat parameters.
pub fn fd_gradient(pot: &MixturePotential, b0: &SampleSet, b1: &SampleSet, h: f64) -> Vec<f64> {
    let flat = pot.to_flat();
    (0..flat.len())
        .map(|i| {
            let mut p = flat.clone();
            p[i] = flat[i] + h;
            let up = empirical_loss(&pot.with_flat(&p).unwrap(), b0, b1).unwrap();
            p[i] = flat[i] - h;
            let down = empirical_loss(&pot.with_flat(&p).unwrap(), b0, b1).unwrap();
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Textbook Adam on plain vectors.
pub struct ReferenceAdam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl ReferenceAdam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64], lr: f64) {
        let (b1, b2, e) = (0.9f64, 0.999f64, 1e-8);
        self.t += 1;
        for i in 0..theta.len() {
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g[i];
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g[i] * g[i];
            let mh = self.m[i] / (1.0 - b1.powi(self.t));
            let vh = self.v[i] / (1.0 - b2.powi(self.t));
            theta[i] -= lr * mh / (vh.sqrt() + e);
        }
    }
}
