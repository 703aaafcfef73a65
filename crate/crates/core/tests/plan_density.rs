mod common;

use std::f64::consts::PI;

use common::oracles::log_norm_quadrature;
use common::quadrature::{integrate, log_integrate};
use common::{random_potential, window};
use mixbridge::rng::{seeded, standard_normal};
use mixbridge::{fit_marginal_em, log_plan_density, MarginalModel, MixturePotential, SampleSet};

#[test]
fn log_norm_matches_quadrature() {
    let mut rng = seeded(100);
    for _ in 0..10 {
        let pot = random_potential(&mut rng, 1, 4, 1.0, 1.0);
        for &x0 in &[-2.0, -0.3, 0.0, 0.7, 2.5] {
            let exact = pot.log_norm(&[x0]).unwrap();
            let quad = log_norm_quadrature(&pot, x0);
            // log-space difference bounds the relative error of c(x0)
            assert!((exact - quad).abs() < 1e-8, "x0={x0}: {exact} vs {quad}");
        }
    }
}

#[test]
fn conditional_integrates_to_one() {
    let mut rng = seeded(101);
    for &eps in &[1.0, 0.1] {
        for _ in 0..5 {
            let pot = random_potential(&mut rng, 1, 3, eps, 1.0);
            for &x0 in &[-1.5, 0.0, 1.2] {
                let plan = pot.conditional_plan(&[x0]).unwrap();
                let (a, b) = window((0..3).map(|k| (plan.mean(k)[0], plan.cov_diag(k)[0].sqrt())));
                let total = integrate(
                    |x1| pot.log_pi_cond(&[x0], &[x1]).unwrap().exp(),
                    a,
                    b,
                    1e-10,
                    64,
                );
                assert!((total - 1.0).abs() < 1e-6, "{total}");
            }
        }
    }
}

fn marginal_1d() -> MarginalModel {
    MarginalModel {
        dim: 1,
        weights: vec![0.3, 0.7],
        means: vec![-1.0, 0.8],
        variances: vec![0.25, 0.64],
    }
}

#[test]
fn plan_density_integrates_to_one() {
    let marg = marginal_1d();
    let pot = random_potential(&mut seeded(102), 1, 3, 0.5, 1.0);
    let (a0, b0) = window([(-1.0, 0.5), (0.8, 0.8)]);
    let total = integrate(
        |x0| {
            let plan = pot.conditional_plan(&[x0]).unwrap();
            let (a1, b1) = window((0..3).map(|k| (plan.mean(k)[0], plan.cov_diag(k)[0].sqrt())));
            integrate(
                |x1| log_plan_density(&marg, &pot, &[x0], &[x1]).unwrap().exp(),
                a1,
                b1,
                1e-9,
                16,
            )
        },
        a0,
        b0,
        1e-7,
        32,
    );
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

#[test]
fn marginalizing_recovers_source_density() {
    let marg = marginal_1d();
    let pot = random_potential(&mut seeded(103), 1, 4, 0.3, 1.0);
    for &x0 in &[-2.0, -1.0, 0.0, 0.5, 1.7] {
        let plan = pot.conditional_plan(&[x0]).unwrap();
        let (a, b) = window((0..4).map(|k| (plan.mean(k)[0], plan.cov_diag(k)[0].sqrt())));
        let log_marg = log_integrate(
            |x1| log_plan_density(&marg, &pot, &[x0], &[x1]).unwrap(),
            a,
            b,
            1e-12,
            64,
        );
        assert!((log_marg - marg.log_density(&[x0])).abs() < 1e-8);
    }
}

#[test]
fn single_components_give_bivariate_normal() {
    let (m, var) = (0.4, 0.9);
    let marg = MarginalModel {
        dim: 1,
        weights: vec![1.0],
        means: vec![m],
        variances: vec![var],
    };
    let (r, s, eps) = (-0.7, 1.6f64, 0.5);
    let pot = MixturePotential::new(1, eps, vec![0.0], vec![r], vec![s.ln()]).unwrap();
    // joint mean (m, r + s m); covariance [[var, s var], [s var, s^2 var + eps s]]
    let (mu0, mu1) = (m, r + s * m);
    let (c00, c01, c11) = (var, s * var, s * s * var + eps * s);
    let det = c00 * c11 - c01 * c01;
    for &(x0, x1) in &[(0.0, 0.0), (1.0, -0.5), (-0.8, 1.9), (0.4, 0.0)] {
        let (d0, d1) = (x0 - mu0, x1 - mu1);
        let quad = (c11 * d0 * d0 - 2.0 * c01 * d0 * d1 + c00 * d1 * d1) / det;
        let want = -(2.0 * PI).ln() - 0.5 * det.ln() - 0.5 * quad;
        let got = log_plan_density(&marg, &pot, &[x0], &[x1]).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

/// Brute-force reference EM, independent of the library's bookkeeping.
fn reference_em_1d(xs: &[f64], mut mu: [f64; 2], iters: usize) -> [f64; 2] {
    let mut var = [1.0, 1.0];
    let mut w = [0.5, 0.5];
    for _ in 0..iters {
        let mut nk = [0.0; 2];
        let mut sx = [0.0; 2];
        let mut sxx = [0.0; 2];
        for &x in xs {
            let p: Vec<f64> = (0..2)
                .map(|k| w[k] * (-(x - mu[k]).powi(2) / (2.0 * var[k])).exp() / var[k].sqrt())
                .collect();
            let z = p[0] + p[1];
            for k in 0..2 {
                nk[k] += p[k] / z;
                sx[k] += p[k] / z * x;
                sxx[k] += p[k] / z * x * x;
            }
        }
        for k in 0..2 {
            mu[k] = sx[k] / nk[k];
            var[k] = sxx[k] / nk[k] - mu[k] * mu[k];
            w[k] = nk[k] / xs.len() as f64;
        }
    }
    mu
}

#[test]
fn em_separates_two_clusters() {
    let mut rng = seeded(104);
    let xs: Vec<f64> = (0..2000)
        .map(|i| (if i % 2 == 0 { -10.0 } else { 10.0 }) + standard_normal(&mut rng))
        .collect();
    let set = SampleSet::new(xs.len(), 1, xs.clone()).unwrap();
    let fit = fit_marginal_em(&set, 2, 50, &mut rng).unwrap();
    let mut got = fit.model.means.clone();
    got.sort_by(f64::total_cmp);
    let want = reference_em_1d(&xs, [-1.0, 1.0], 50);
    for (g, w) in got.iter().zip([-10.0, 10.0]) {
        assert!((g - w).abs() < 0.1, "{got:?}");
    }
    assert!((got[0] - want[0].min(want[1])).abs() < 1e-6);
    assert!((got[1] - want[0].max(want[1])).abs() < 1e-6);
}
