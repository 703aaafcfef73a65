use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{pairwise_sum, sq_dist};
use crate::samples::SampleSet;

/// Energy distance `2 E|X - Y| - E|X - X'| - E|Y - Y'|`.
///
/// Every expectation averages over all ordered pairs including the diagonal
/// (V-statistic), so `energy_distance(X, X)` is exactly zero and the value
/// is never negative beyond rounding.
pub fn energy_distance(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if x.len() < 2 || y.len() < 2 {
        return Err(Error::invalid(
            "energy distance needs at least two samples per set",
        ));
    }
    let xy = mean_pair_distance(x, y);
    let xx = mean_pair_distance(x, x);
    let yy = mean_pair_distance(y, y);
    Ok(2.0 * xy - xx - yy)
}

/// Mean Euclidean distance over all `(a_i, b_j)` pairs. Per-row partial sums
/// are computed in parallel and then reduced in a fixed order.
pub(crate) fn mean_pair_distance(a: &SampleSet, b: &SampleSet) -> f64 {
    let row_sums: Vec<f64> = (0..a.len())
        .into_par_iter()
        .map(|i| {
            let xi = a.row(i);
            let dists: Vec<f64> = b.rows().map(|yj| sq_dist(xi, yj).sqrt()).collect();
            pairwise_sum(&dists)
        })
        .collect();
    pairwise_sum(&row_sums) / (a.len() as f64 * b.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        let x = SampleSet::from_rows(&[vec![0.0], vec![0.0]]).unwrap();
        let y = SampleSet::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        assert_eq!(energy_distance(&x, &y).unwrap(), 2.0);
        assert_eq!(energy_distance(&x, &x).unwrap(), 0.0);
    }

    #[test]
    fn rejects_tiny_or_mismatched() {
        let a = SampleSet::from_rows(&[vec![0.0]]).unwrap();
        let b = SampleSet::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = SampleSet::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!(energy_distance(&a, &b).is_err());
        assert!(energy_distance(&b, &c).is_err());
    }
}
