mod common;

use common::{random_potential, within_sigma};
use mixbridge::evaluation::energy_distance;
use mixbridge::rng::{seeded, standard_normal};
use mixbridge::{
    bridge_insert, euler_maruyama, sample_bridge_trajectories, MixturePotential, SampleSet,
};

const N: usize = 100_000;

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Mean within 5 sd of `sqrt(var / n)`, sample variance within 5 sd of
/// `var sqrt(2 / (n - 1))` (Gaussian data).
fn assert_gaussian_moments(xs: &[f64], mean: f64, var: f64) {
    let n = xs.len() as f64;
    let (m, v) = mean_var(xs);
    assert!(
        within_sigma(m, mean, (var / n).sqrt(), 5.0),
        "mean {m} vs {mean}"
    );
    assert!(
        within_sigma(v, var, var * (2.0 / (n - 1.0)).sqrt(), 5.0),
        "var {v} vs {var}"
    );
}

#[test]
fn identity_conditional_moments() {
    let eps = 0.3;
    let pot = MixturePotential::standard(2, eps).unwrap();
    let x0 = [0.7, -1.2];
    let s = pot.sample_conditional(&x0, N, &mut seeded(400)).unwrap();
    for j in 0..2 {
        let col: Vec<f64> = s.rows().map(|r| r[j]).collect();
        assert_gaussian_moments(&col, x0[j], eps);
    }
    assert_eq!(
        pot.sample_conditional(&x0, 1, &mut seeded(0))
            .unwrap()
            .len(),
        1
    );
}

#[test]
fn component_frequencies_match_weights() {
    let pot = random_potential(&mut seeded(401), 2, 5, 1.0, 1.0);
    let plan = pot.conditional_plan(&[0.3, -0.4]).unwrap();
    let w = plan.weights();
    let mut counts = vec![0usize; 5];
    let mut rng = seeded(402);
    for _ in 0..N {
        counts[plan.sample_component(&mut rng)] += 1;
    }
    for (c, p) in counts.iter().zip(&w) {
        let sd = (N as f64 * p * (1.0 - p)).sqrt().max(1.0);
        assert!(
            within_sigma(*c as f64, N as f64 * p, sd, 5.0),
            "{counts:?} vs {w:?}"
        );
    }
}

#[test]
fn bridge_midpoint_moments() {
    let mut rng = seeded(403);
    let xs: Vec<f64> = (0..N)
        .map(|_| bridge_insert(&[0.0], &[0.0], 0.0, 1.0, 0.5, 1.0, &mut rng).unwrap()[0])
        .collect();
    assert_gaussian_moments(&xs, 0.0, 0.25);
}

#[test]
fn nested_bridge_matches_direct_insertion() {
    let (a, b, eps) = (-1.0, 2.0, 0.8);
    let mut rng = seeded(404);
    let nested: Vec<f64> = (0..N)
        .map(|_| {
            let q = bridge_insert(&[a], &[b], 0.0, 1.0, 0.25, eps, &mut rng).unwrap();
            bridge_insert(&q, &[b], 0.25, 1.0, 0.5, eps, &mut rng).unwrap()[0]
        })
        .collect();
    let direct: Vec<f64> = (0..N)
        .map(|_| bridge_insert(&[a], &[b], 0.0, 1.0, 0.5, eps, &mut rng).unwrap()[0])
        .collect();
    let (mn, vn) = mean_var(&nested);
    let (md, vd) = mean_var(&direct);
    let var = eps * 0.25;
    let n = N as f64;
    assert!(within_sigma(mn - md, 0.0, (2.0 * var / n).sqrt(), 5.0));
    assert!(within_sigma(
        vn - vd,
        0.0,
        var * (4.0 / (n - 1.0)).sqrt(),
        5.0
    ));
    assert_gaussian_moments(&direct, 0.5, var);
}

#[test]
fn zero_drift_euler_increments_are_wiener() {
    let eps = 0.5;
    let steps = 10;
    let pot = MixturePotential::standard(1, eps).unwrap();
    let x0 = SampleSet::new(N, 1, vec![0.3; N]).unwrap();
    let tr = euler_maruyama(&pot, &x0, steps, &mut seeded(405)).unwrap();
    let dt = 1.0 / steps as f64;
    for s in [0, 4, 9] {
        let inc: Vec<f64> = (0..N)
            .map(|p| tr.state(p, s + 1)[0] - tr.state(p, s)[0])
            .collect();
        assert_gaussian_moments(&inc, 0.0, eps * dt);
    }
}

#[test]
fn identity_bridge_marginal_is_wiener() {
    let eps = 0.7;
    let pot = MixturePotential::standard(1, eps).unwrap();
    let x0 = SampleSet::new(N, 1, vec![-0.4; N]).unwrap();
    let tr = sample_bridge_trajectories(&pot, &x0, &[0.1, 0.3, 0.6], &mut seeded(406)).unwrap();
    assert_eq!(tr.times, vec![0.0, 0.1, 0.3, 0.6, 1.0]);
    let at: Vec<f64> = (0..N).map(|p| tr.state(p, 2)[0]).collect();
    assert_gaussian_moments(&at, -0.4, eps * 0.3);
}

#[test]
fn bridge_endpoints_follow_conditional_law() {
    let pot = random_potential(&mut seeded(407), 1, 3, 0.5, 1.0);
    let x0 = SampleSet::new(N, 1, vec![0.5; N]).unwrap();
    let tr = sample_bridge_trajectories(&pot, &x0, &[], &mut seeded(408)).unwrap();
    let ends: Vec<f64> = (0..N).map(|p| tr.state(p, 1)[0]).collect();
    let (m, c) = pot.conditional_plan(&[0.5]).unwrap().moments();
    let n = N as f64;
    let (em, _) = mean_var(&ends);
    assert!(
        within_sigma(em, m[0], (c[(0, 0)] / n).sqrt(), 5.0),
        "{em} vs {}",
        m[0]
    );
}

/// Endpoint law of Euler–Maruyama approaches the exact conditional law as
/// the step count grows, down to the same-law noise floor.
#[test]
fn euler_weak_convergence_towards_noise_floor() {
    let n = 3000;
    let pot = random_potential(&mut seeded(409), 2, 4, 0.2, 1.0);
    let mut rng = seeded(410);
    let x0 = SampleSet::new(
        n,
        2,
        (0..2 * n).map(|_| standard_normal(&mut rng)).collect(),
    )
    .unwrap();
    let direct = pot.sample_conditional_batch(&x0, &mut rng).unwrap();
    let again = pot.sample_conditional_batch(&x0, &mut rng).unwrap();
    let floor = energy_distance(&direct, &again).unwrap();
    let eds: Vec<f64> = [1, 10, 100, 1000]
        .iter()
        .map(|&s| {
            let tr = euler_maruyama(&pot, &x0, s, &mut seeded(411)).unwrap();
            energy_distance(&tr.endpoints(), &direct).unwrap()
        })
        .collect();
    assert!(eds[0] > 3.0 * floor, "{eds:?} floor {floor}");
    for w in eds.windows(2) {
        assert!(w[1] <= w[0] + floor, "{eds:?} floor {floor}");
    }
    assert!(eds[3] < 3.0 * floor, "{eds:?} floor {floor}");
}
