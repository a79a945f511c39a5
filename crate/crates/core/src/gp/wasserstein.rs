use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::ProductMeasure;
use crate::predictor::DEFAULT_DENSE_LIMIT;

/// Eigenvalues above `−SQRT_CLIP_TOL · scale` are clipped to 0 before taking roots.
pub const SQRT_CLIP_TOL: f64 = 1e-10;

/// Principal square root of a symmetric PSD matrix.
pub fn psd_sqrt(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension("matrix square root needs a square matrix".into()));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("covariance has non-finite entries".into()));
    }
    let scale = a.amax().max(1.0);
    if (a - a.transpose()).amax() > 1e-10 * scale {
        return Err(Error::Parameter("covariance is not symmetric".into()));
    }
    let eig = ((a + a.transpose()) * 0.5).symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min < -SQRT_CLIP_TOL * scale {
        return Err(Error::Parameter(format!(
            "covariance is not positive semidefinite (min eigenvalue {min:e})"
        )));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let out = &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose();
    Ok((&out + out.transpose()) * 0.5)
}

/// `W₂(N(0, A), N(0, B))` in the Euclidean norm:
/// `W₂² = tr(A + B − 2 (A^{1/2} B A^{1/2})^{1/2})`.
pub fn gaussian_w2(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "covariances have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let ra = psd_sqrt(a)?;
    psd_sqrt(b)?;
    let middle = &ra * b * &ra;
    let cross = psd_sqrt(&((&middle + middle.transpose()) * 0.5))?;
    let w2 = a.trace() + b.trace() - 2.0 * cross.trace();
    Ok(w2.max(0.0).sqrt())
}

/// `W₂` with the `L²(μ)` norm on `ℝ^{|𝒴|}`: both covariances are mapped to
/// `D^{1/2} K D^{1/2}`, `D = diag(μ)`.
pub fn gaussian_w2_weighted(a: &DMatrix<f64>, b: &DMatrix<f64>, measure: &ProductMeasure) -> Result<f64> {
    let w = measure.dense_weights(DEFAULT_DENSE_LIMIT)?;
    if a.nrows() != w.len() {
        return Err(Error::Dimension(format!(
            "covariance of size {} for a space of {} states",
            a.nrows(),
            w.len()
        )));
    }
    let root: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let scale = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| root[i] * m[(i, j)] * root[j]);
    gaussian_w2(&scale(a), &scale(b))
}
