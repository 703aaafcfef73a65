use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::samples::SampleSet;

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues
/// (from rounding or a poor estimate) are floored at zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Squared Bures–Wasserstein distance between `N(mx, cx)` and `N(my, cy)`.
pub fn bw2(mx: &[f64], cx: &DMatrix<f64>, my: &[f64], cy: &DMatrix<f64>) -> f64 {
    let mean_term: f64 = mx.iter().zip(my).map(|(a, b)| (a - b) * (a - b)).sum();
    let rx = psd_sqrt(cx);
    let cross = psd_sqrt(&(&rx * cy * &rx));
    let cov_term = cx.trace() + cy.trace() - 2.0 * cross.trace();
    mean_term + cov_term.max(0.0)
}

/// BW2-UVP in percent, normalized by half the trace of the target (`y`)
/// covariance.
pub fn bw2_uvp_moments(
    mx: &[f64],
    cx: &DMatrix<f64>,
    my: &[f64],
    cy: &DMatrix<f64>,
) -> Result<f64> {
    let d = my.len();
    if mx.len() != d || cx.shape() != (d, d) || cy.shape() != (d, d) {
        return Err(Error::invalid("moment shapes do not agree"));
    }
    let scale = 0.5 * cy.trace();
    if !(scale > 0.0) {
        return Err(Error::invalid("target covariance has zero trace"));
    }
    Ok(100.0 * bw2(mx, cx, my, cy) / scale)
}

/// Sample mean and (unbiased) covariance as nalgebra objects.
pub fn gaussian_moments(x: &SampleSet) -> (Vec<f64>, DMatrix<f64>) {
    let d = x.dim();
    (x.mean(), DMatrix::from_row_slice(d, d, &x.covariance()))
}

/// BW2-UVP between Gaussian fits of two sample sets, `y` being the target.
pub fn bw2_uvp(x: &SampleSet, y: &SampleSet) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: y.dim(),
            got: x.dim(),
        });
    }
    if x.len() <= x.dim() || y.len() <= y.dim() {
        return Err(Error::invalid(
            "need more samples than dimensions to estimate a covariance",
        ));
    }
    let (mx, cx) = gaussian_moments(x);
    let (my, cy) = gaussian_moments(y);
    bw2_uvp_moments(&mx, &cx, &my, &cy)
}
