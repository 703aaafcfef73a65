use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major `n x dim` matrix of float64 samples from one distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    n: usize,
    dim: usize,
    data: Vec<f64>,
}

impl SampleSet {
    pub fn new(n: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::invalid(
                "sample set needs at least one row and one column",
            ));
        }
        if data.len() != n * dim {
            return Err(Error::DimensionMismatch {
                expected: n * dim,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample set"));
        }
        Ok(Self { n, dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, data)
    }

    pub(crate) fn from_vec_unchecked(n: usize, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), n * dim);
        Self { n, dim, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, b) in m.iter_mut().zip(row) {
                *a += b;
            }
        }
        m.iter_mut().for_each(|v| *v /= self.n as f64);
        m
    }

    /// Unbiased sample covariance, row-major `dim x dim`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim;
        let mean = self.mean();
        let mut cov = vec![0.0; d * d];
        for row in self.rows() {
            for i in 0..d {
                let di = row[i] - mean[i];
                for j in i..d {
                    cov[i * d + j] += di * (row[j] - mean[j]);
                }
            }
        }
        let denom = (self.n.max(2) - 1) as f64;
        for i in 0..d {
            for j in i..d {
                cov[i * d + j] /= denom;
                cov[j * d + i] = cov[i * d + j];
            }
        }
        cov
    }

    /// Rows `start..end` as a new set.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::invalid(format!(
                "row range {start}..{end} out of bounds for {} rows",
                self.n
            )));
        }
        Ok(Self::from_vec_unchecked(
            end - start,
            self.dim,
            self.data[start * self.dim..end * self.dim].to_vec(),
        ))
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_bad_shapes() {
        assert!(SampleSet::new(1, 2, vec![0.0, f64::NAN]).is_err());
        assert!(SampleSet::new(2, 2, vec![0.0; 3]).is_err());
        assert!(SampleSet::new(0, 2, vec![]).is_err());
        assert!(SampleSet::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn moments() {
        let s = SampleSet::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 8.0]]).unwrap();
        assert_eq!(s.mean(), vec![2.0, 4.0]);
        let c = s.covariance();
        assert_eq!(c[0], 4.0);
        assert_eq!(c[1], c[2]);
        assert_eq!(c[1], 7.0);
    }
}
