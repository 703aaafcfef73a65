use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, sq_dist};
use crate::samples::SampleSet;

/// Entropic plan between two discrete measures, stored as log masses.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscretePlan {
    pub support0: SampleSet,
    pub support1: SampleSet,
    pub marg0: Vec<f64>,
    pub marg1: Vec<f64>,
    /// Row-major `N x M`.
    pub log_plan: Vec<f64>,
    pub epsilon: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Max marginal violation after each iteration.
    pub violations: Vec<f64>,
}

/// Quadratic cost `|x - y|^2 / 2`.
#[inline]
pub fn quadratic_cost(x: &[f64], y: &[f64]) -> f64 {
    0.5 * sq_dist(x, y)
}

/// Largest pairwise cost; multiply a relative epsilon by this to get the
/// absolute regularization for a cost-normalized problem.
pub fn max_cost(support0: &SampleSet, support1: &SampleSet) -> f64 {
    support0
        .rows()
        .flat_map(|x| support1.rows().map(move |y| quadratic_cost(x, y)))
        .fold(0.0, f64::max)
}

/// Log-domain Sinkhorn for cost `|x - y|^2 / 2` and regularization
/// `epsilon`. Stops once the largest absolute marginal violation (rows and
/// columns) falls below `tol`, or after `max_iter` sweeps with
/// `converged = false`.
pub fn sinkhorn_oracle(
    support0: &SampleSet,
    support1: &SampleSet,
    marg0: &[f64],
    marg1: &[f64],
    epsilon: f64,
    tol: f64,
    max_iter: usize,
) -> Result<DiscretePlan> {
    let (n, m) = (support0.len(), support1.len());
    if support0.dim() != support1.dim() {
        return Err(Error::DimensionMismatch {
            expected: support0.dim(),
            got: support1.dim(),
        });
    }
    if marg0.len() != n || marg1.len() != m {
        return Err(Error::invalid("marginal lengths must match the supports"));
    }
    for marg in [marg0, marg1] {
        if marg.iter().any(|&w| !(w > 0.0)) || (marg.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("marginals must be positive and sum to one"));
        }
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid("epsilon must be positive"));
    }

    let neg_cost: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let x = support0.row(i);
            support1
                .rows()
                .map(move |y| -quadratic_cost(x, y) / epsilon)
                .collect::<Vec<_>>()
        })
        .collect();
    let log_a: Vec<f64> = marg0.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = marg1.iter().map(|w| w.ln()).collect();
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    let mut violations = Vec::new();
    let mut converged = false;

    for _ in 0..max_iter {
        u = (0..n)
            .into_par_iter()
            .map(|i| {
                let row: Vec<f64> = (0..m).map(|j| v[j] + neg_cost[i * m + j]).collect();
                log_a[i] - log_sum_exp(&row)
            })
            .collect();
        v = (0..m)
            .into_par_iter()
            .map(|j| {
                let col: Vec<f64> = (0..n).map(|i| u[i] + neg_cost[i * m + j]).collect();
                log_b[j] - log_sum_exp(&col)
            })
            .collect();
        let viol = max_violation(&u, &v, &neg_cost, marg0, marg1);
        violations.push(viol);
        if viol < tol {
            converged = true;
            break;
        }
    }

    let log_plan = (0..n * m)
        .map(|idx| u[idx / m] + v[idx % m] + neg_cost[idx])
        .collect();
    Ok(DiscretePlan {
        support0: support0.clone(),
        support1: support1.clone(),
        marg0: marg0.to_vec(),
        marg1: marg1.to_vec(),
        log_plan,
        epsilon,
        converged,
        iterations: violations.len(),
        violations,
    })
}

fn max_violation(u: &[f64], v: &[f64], neg_cost: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let m = v.len();
    let mut cols = vec![0.0; m];
    let mut worst: f64 = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        let mut row = 0.0;
        for j in 0..m {
            let p = (ui + v[j] + neg_cost[i * m + j]).exp();
            row += p;
            cols[j] += p;
        }
        worst = worst.max((row - a[i]).abs());
    }
    for (c, &bj) in cols.iter().zip(b) {
        worst = worst.max((c - bj).abs());
    }
    worst
}

impl DiscretePlan {
    pub fn n0(&self) -> usize {
        self.support0.len()
    }

    pub fn n1(&self) -> usize {
        self.support1.len()
    }

    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.log_plan[i * self.n1() + j].exp()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n0())
            .map(|i| (0..self.n1()).map(|j| self.mass(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.n1())
            .map(|j| (0..self.n0()).map(|i| self.mass(i, j)).sum())
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.log_plan.iter().map(|l| l.exp()).sum()
    }

    /// `sum P (c + eps (log P - log a - log b))`: transport cost plus
    /// `eps KL(P | a x b)`.
    pub fn objective(&self) -> f64 {
        let m = self.n1();
        let mut total = 0.0;
        for i in 0..self.n0() {
            for j in 0..m {
                let lp = self.log_plan[i * m + j];
                let p = lp.exp();
                if p > 0.0 {
                    let c = quadratic_cost(self.support0.row(i), self.support1.row(j));
                    total +=
                        p * (c + self.epsilon * (lp - self.marg0[i].ln() - self.marg1[j].ln()));
                }
            }
        }
        total
    }

    /// Objective of the independent coupling `a x b` (its KL term is zero).
    pub fn independent_objective(&self) -> f64 {
        let mut total = 0.0;
        for (i, &ai) in self.marg0.iter().enumerate() {
            for (j, &bj) in self.marg1.iter().enumerate() {
                total += ai * bj * quadratic_cost(self.support0.row(i), self.support1.row(j));
            }
        }
        total
    }

    /// Conditional mean of the target given each source atom.
    pub fn barycentric_projection(&self) -> SampleSet {
        let (m, d) = (self.n1(), self.support1.dim());
        let mut out = vec![0.0; self.n0() * d];
        for i in 0..self.n0() {
            let lse = log_sum_exp(&self.log_plan[i * m..(i + 1) * m]);
            for j in 0..m {
                let w = (self.log_plan[i * m + j] - lse).exp();
                for (o, &y) in out[i * d..(i + 1) * d].iter_mut().zip(self.support1.row(j)) {
                    *o += w * y;
                }
            }
        }
        SampleSet::from_vec_unchecked(self.n0(), d, out)
    }
}
