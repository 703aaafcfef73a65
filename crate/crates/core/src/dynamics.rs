//! The diffusion process whose endpoint law is the learned plan: closed-form
//! drift, Euler–Maruyama integration and exact Brownian-bridge refinement.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::softmax_in_place;
use crate::potential::MixturePotential;
use crate::rng::{standard_normal, stream};
use crate::samples::SampleSet;

/// Drift evaluations are refused for `t > 1 - TIME_GUARD`.
pub const TIME_GUARD: f64 = 1e-6;

/// Simulated trajectories: `states[p][i]` is particle `p` at `times[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBatch {
    pub times: Vec<f64>,
    /// Row-major `P x T x D`.
    pub states: Vec<f64>,
    pub n_particles: usize,
    pub dim: usize,
    pub epsilon: f64,
}

impl TrajectoryBatch {
    pub fn new(
        times: Vec<f64>,
        states: Vec<f64>,
        n_particles: usize,
        dim: usize,
        epsilon: f64,
    ) -> Result<Self> {
        if times.first() != Some(&0.0) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid(
                "trajectory times must start at 0 and increase strictly",
            ));
        }
        if states.len() != n_particles * times.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: n_particles * times.len() * dim,
                got: states.len(),
            });
        }
        if states.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trajectory states"));
        }
        Ok(Self {
            times,
            states,
            n_particles,
            dim,
            epsilon,
        })
    }

    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, particle: usize, time_index: usize) -> &[f64] {
        let start = (particle * self.n_times() + time_index) * self.dim;
        &self.states[start..start + self.dim]
    }

    pub fn trajectory(&self, particle: usize) -> &[f64] {
        let len = self.n_times() * self.dim;
        &self.states[particle * len..(particle + 1) * len]
    }

    /// All particles at `times[time_index]`.
    pub fn marginal(&self, time_index: usize) -> SampleSet {
        let data = (0..self.n_particles)
            .flat_map(|p| self.state(p, time_index).to_vec())
            .collect();
        SampleSet::from_vec_unchecked(self.n_particles, self.dim, data)
    }

    pub fn endpoints(&self) -> SampleSet {
        self.marginal(self.n_times() - 1)
    }
}

/// One drift evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftEval {
    pub x: Vec<f64>,
    pub t: f64,
    pub g: Vec<f64>,
}

/// Drift of the bridge process at `(x, t)`.
///
/// With `A_k = t/(eps(1-t)) I + S_k^{-1}/eps` and
/// `h_k = x/(eps(1-t)) + S_k^{-1} r_k / eps`, the drift is
/// `eps * grad_x log[ exp(-|x|^2 / (2 eps (1-t))) *
///   sum_k alpha_k N(r_k | 0, eps S_k) |A_k|^{-1/2} exp(+h_k' A_k^{-1} h_k / 2) ]`.
/// For diagonal `S_k` the `x`-dependent pieces collapse per coordinate to
///
/// ```text
/// log-weight_k = log alpha_k + sum_d [ -ln(t s + 1 - t) / 2
///                + (x^2 (s - 1) + 2 x r - t r^2) / (2 eps (t s + 1 - t)) ]
/// g(x, t)      = sum_k softmax(log-weight)_k * (x (s - 1) + r) / (t s + 1 - t)
/// ```
///
/// (terms common to all components dropped), which has no `1/(1-t)` blow-up.
pub fn drift(pot: &MixturePotential, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_time(t)?;
    if x.len() != pot.dim() {
        return Err(Error::DimensionMismatch {
            expected: pot.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("drift input"));
    }
    let mut g = vec![0.0; pot.dim()];
    let mut w = vec![0.0; pot.n_components()];
    drift_into(pot, x, t, &mut w, &mut g);
    Ok(g)
}

/// [`drift`] packaged with its arguments.
pub fn drift_eval(pot: &MixturePotential, x: &[f64], t: f64) -> Result<DriftEval> {
    Ok(DriftEval {
        x: x.to_vec(),
        t,
        g: drift(pot, x, t)?,
    })
}

fn check_time(t: f64) -> Result<()> {
    let max = 1.0 - TIME_GUARD;
    if !(0.0..=max).contains(&t) {
        return Err(Error::TimeOutOfRange { t, max });
    }
    Ok(())
}

fn drift_into(pot: &MixturePotential, x: &[f64], t: f64, w: &mut [f64], g: &mut [f64]) {
    let d = pot.dim();
    let eps = pot.epsilon();
    let tau = 1.0 - t;
    for (k, wk) in w.iter_mut().enumerate() {
        let r = pot.mean(k);
        let ls = pot.log_scale(k);
        let mut acc = pot.log_weights()[k];
        for j in 0..d {
            let s = ls[j].exp();
            let denom = t * s + tau;
            acc += -0.5 * denom.ln()
                + (x[j] * x[j] * (s - 1.0) + 2.0 * x[j] * r[j] - t * r[j] * r[j])
                    / (2.0 * eps * denom);
        }
        *wk = acc;
    }
    softmax_in_place(w);
    g.iter_mut().for_each(|v| *v = 0.0);
    for (k, &wk) in w.iter().enumerate() {
        let r = pot.mean(k);
        let ls = pot.log_scale(k);
        for j in 0..d {
            let s = ls[j].exp();
            g[j] += wk * (x[j] * (s - 1.0) + r[j]) / (t * s + tau);
        }
    }
}

/// Euler–Maruyama with `n_steps` uniform steps on `[0, 1]`.
///
/// Each particle uses its own random stream derived from one `u64` drawn
/// from `rng`, so the result does not depend on the thread count.
pub fn euler_maruyama<R: Rng + ?Sized>(
    pot: &MixturePotential,
    x0: &SampleSet,
    n_steps: usize,
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    if n_steps == 0 {
        return Err(Error::invalid("n_steps must be at least 1"));
    }
    x0.check_dim(pot.dim())?;
    let d = pot.dim();
    let n_times = n_steps + 1;
    let dt = 1.0 / n_steps as f64;
    let noise = (pot.epsilon() * dt).sqrt();
    let base: u64 = rng.random();

    let mut states = vec![0.0; x0.len() * n_times * d];
    states
        .par_chunks_mut(n_times * d)
        .enumerate()
        .try_for_each(|(p, traj)| -> Result<()> {
            let mut prng = stream(base, p as u64);
            let mut w = vec![0.0; pot.n_components()];
            let mut g = vec![0.0; d];
            traj[..d].copy_from_slice(x0.row(p));
            for s in 0..n_steps {
                let (head, tail) = traj.split_at_mut((s + 1) * d);
                let cur = &head[s * d..];
                drift_into(pot, cur, s as f64 * dt, &mut w, &mut g);
                let next = &mut tail[..d];
                for j in 0..d {
                    next[j] = cur[j] + g[j] * dt + noise * standard_normal(&mut prng);
                }
                if next.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFiniteState {
                        step: s + 1,
                        n_steps,
                    });
                }
            }
            Ok(())
        })?;

    let times = (0..n_times).map(|s| s as f64 * dt).collect();
    TrajectoryBatch::new(times, states, x0.len(), d, pot.epsilon())
}

/// Draws `x_t` from the Brownian bridge pinned at `(t_left, x_left)` and
/// `(t_right, x_right)` with volatility `eps`.
#[allow(clippy::too_many_arguments)]
pub fn bridge_insert<R: Rng + ?Sized>(
    x_left: &[f64],
    x_right: &[f64],
    t_left: f64,
    t_right: f64,
    t: f64,
    epsilon: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(t_left < t && t < t_right) {
        return Err(Error::TimeOrdering { t_left, t, t_right });
    }
    if x_left.len() != x_right.len() {
        return Err(Error::DimensionMismatch {
            expected: x_left.len(),
            got: x_right.len(),
        });
    }
    let mut out = vec![0.0; x_left.len()];
    bridge_into(x_left, x_right, t_left, t_right, t, epsilon, rng, &mut out);
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn bridge_into<R: Rng + ?Sized>(
    x_left: &[f64],
    x_right: &[f64],
    t_left: f64,
    t_right: f64,
    t: f64,
    epsilon: f64,
    rng: &mut R,
    out: &mut [f64],
) {
    let span = t_right - t_left;
    let frac = (t - t_left) / span;
    let sd = (epsilon * (t - t_left) * (t_right - t) / span).sqrt();
    for ((o, &a), &b) in out.iter_mut().zip(x_left).zip(x_right) {
        *o = a + frac * (b - a) + sd * standard_normal(rng);
    }
}

/// Samples `x1 ~ pi(. | x0)` for every start point and fills the interior
/// `times` (sorted, inside `(0, 1)`) by recursive midpoint-first bridging.
/// The returned grid is `[0, times..., 1]`.
pub fn sample_bridge_trajectories<R: Rng + ?Sized>(
    pot: &MixturePotential,
    x0: &SampleSet,
    times: &[f64],
    rng: &mut R,
) -> Result<TrajectoryBatch> {
    x0.check_dim(pot.dim())?;
    if times.iter().any(|&t| !(t > 0.0 && t < 1.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid(
            "bridge times must be strictly increasing inside (0, 1)",
        ));
    }
    let d = pot.dim();
    let mut grid = Vec::with_capacity(times.len() + 2);
    grid.push(0.0);
    grid.extend_from_slice(times);
    grid.push(1.0);
    let n_times = grid.len();
    let eps = pot.epsilon();
    let base: u64 = rng.random();

    let mut states = vec![0.0; x0.len() * n_times * d];
    states
        .par_chunks_mut(n_times * d)
        .enumerate()
        .for_each(|(p, traj)| {
            let mut prng = stream(base, p as u64);
            let start = x0.row(p);
            traj[..d].copy_from_slice(start);
            pot.conditional_plan_unchecked(start)
                .sample_into(&mut prng, &mut traj[(n_times - 1) * d..]);
            fill_bridge(traj, &grid, 0, n_times - 1, d, eps, &mut prng);
        });

    TrajectoryBatch::new(grid, states, x0.len(), d, eps)
}

fn fill_bridge<R: Rng + ?Sized>(
    traj: &mut [f64],
    grid: &[f64],
    lo: usize,
    hi: usize,
    d: usize,
    eps: f64,
    rng: &mut R,
) {
    if hi - lo < 2 {
        return;
    }
    let mid = lo + (hi - lo) / 2;
    let (left, rest) = traj.split_at_mut(mid * d);
    let (mid_state, right) = rest.split_at_mut(d);
    let x_left = &left[lo * d..(lo + 1) * d];
    let x_right = &right[(hi - mid - 1) * d..(hi - mid) * d];
    bridge_into(
        x_left, x_right, grid[lo], grid[hi], grid[mid], eps, rng, mid_state,
    );
    fill_bridge(traj, grid, lo, mid, d, eps, rng);
    fill_bridge(traj, grid, mid, hi, d, eps, rng);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn identity_potential_has_zero_drift() {
        let p = MixturePotential::standard(3, 0.7).unwrap();
        for &t in &[0.0, 0.3, 0.9, 1.0 - TIME_GUARD] {
            let g = drift(&p, &[1.5, -2.0, 0.1], t).unwrap();
            assert!(g.iter().all(|v| v.abs() < 1e-12), "{g:?}");
        }
    }

    #[test]
    fn drift_at_zero_is_conditional_mean_minus_x() {
        let p = MixturePotential::new(
            2,
            0.4,
            vec![0.3, -0.2, 0.0],
            vec![1.0, -1.0, 0.5, 2.0, -0.3, 0.0],
            vec![-0.5, 0.3, 0.1, -1.0, 0.2, 0.0],
        )
        .unwrap();
        let x = [0.4, -0.6];
        let g = drift(&p, &x, 0.0).unwrap();
        let (m, _) = p.conditional_plan(&x).unwrap().moments();
        for j in 0..2 {
            assert!((g[j] - (m[j] - x[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn drift_time_guard() {
        let p = MixturePotential::standard(1, 1.0).unwrap();
        assert!(drift(&p, &[0.0], 1.0).is_err());
        assert!(drift(&p, &[0.0], 1.0 - 1e-7).is_err());
        assert!(drift(&p, &[0.0], -0.1).is_err());
        assert!(drift(&p, &[0.0], 1.0 - TIME_GUARD).is_ok());
    }

    #[test]
    fn bridge_ordering_rejected() {
        let mut rng = seeded(0);
        assert!(bridge_insert(&[0.0], &[1.0], 0.5, 0.4, 0.45, 1.0, &mut rng).is_err());
        assert!(bridge_insert(&[0.0], &[1.0], 0.0, 1.0, 1.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn bridge_near_left_end_collapses() {
        let mut rng = seeded(0);
        let x = bridge_insert(&[2.0, -1.0], &[5.0, 5.0], 0.0, 1.0, 1e-14, 1.0, &mut rng).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-5 && (x[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn em_grid_and_shape() {
        let p = MixturePotential::standard(2, 1.0).unwrap();
        let x0 = SampleSet::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let tr = euler_maruyama(&p, &x0, 4, &mut seeded(1)).unwrap();
        assert_eq!(tr.times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(tr.state(1, 0), &[1.0, 1.0]);
        assert!(euler_maruyama(&p, &x0, 0, &mut seeded(1)).is_err());
    }

    #[test]
    fn bridge_without_interior_times() {
        let p = MixturePotential::standard(1, 1.0).unwrap();
        let x0 = SampleSet::from_rows(&[vec![0.5]]).unwrap();
        let tr = sample_bridge_trajectories(&p, &x0, &[], &mut seeded(3)).unwrap();
        assert_eq!(tr.times, vec![0.0, 1.0]);
        assert!(sample_bridge_trajectories(&p, &x0, &[0.5, 0.2], &mut seeded(3)).is_err());
        assert!(sample_bridge_trajectories(&p, &x0, &[1.0], &mut seeded(3)).is_err());
    }
}
