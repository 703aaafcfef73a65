//! Metrics for comparing distributions and plans, a discrete Sinkhorn
//! reference solver and the ground-truth pair generator.

mod benchmark;
mod bures;
mod energy;
mod kl;
mod sinkhorn;

pub use benchmark::{
    cbw2_uvp, cbw2_uvp_at, make_ground_truth_pair, random_benchmark_potential, GroundTruthPair,
    MomentMode, SourceSpec, BENCHMARK_MAX_SCALE, BENCHMARK_MEAN_RADIUS, BENCHMARK_MIN_SCALE,
};
pub use bures::{bw2, bw2_uvp, bw2_uvp_moments, gaussian_moments, psd_sqrt};
pub use energy::energy_distance;
pub use kl::kl_plan_mc;
pub use sinkhorn::{max_cost, quadratic_cost, sinkhorn_oracle, DiscretePlan};

use crate::math::pairwise_sum;

/// A mean of per-item values with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let mean = pairwise_sum(values) / n as f64;
        let stderr = if n > 1 {
            let ss: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
            (pairwise_sum(&ss) / (n as f64 - 1.0) / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Self {
            value: mean,
            stderr,
            n,
        }
    }
}

/// One line of a metrics CSV: `metric,value,stderr,n,seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricRecord {
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl MetricRecord {
    pub fn new(metric: impl Into<String>, est: McEstimate, seed: u64) -> Self {
        Self {
            metric: metric.into(),
            value: est.value,
            stderr: est.stderr,
            n: est.n,
            seed,
        }
    }

    pub const CSV_HEADER: &'static str = "metric,value,stderr,n,seed";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{:.16e},{:.16e},{},{}",
            self.metric, self.value, self.stderr, self.n, self.seed
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_of_constant() {
        let e = McEstimate::from_values(&[2.0, 2.0, 2.0]);
        assert_eq!((e.value, e.stderr, e.n), (2.0, 0.0, 3));
        assert!(McEstimate::from_values(&[1.0]).stderr.is_nan());
    }

    #[test]
    fn csv_line_format() {
        let r = MetricRecord::new(
            "energy",
            McEstimate {
                value: 0.5,
                stderr: 0.0,
                n: 10,
            },
            7,
        );
        assert_eq!(
            r.csv_line(),
            "energy,5.0000000000000000e-1,0.0000000000000000e0,10,7"
        );
    }
}
