use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::ClassFeatureMatrix;
use crate::Scalar;

/// Eigenvalues of `z z^T / (N - 1)`, non-increasing, with `N` the number of
/// columns. Computed with nalgebra's symmetric eigensolver so it shares no
/// code with [`super::singular_values`]; intended as a cross-check.
///
/// The covariance reading assumes a row-centered matrix.
pub fn covariance_eigenvalues_oracle<T: Scalar>(matrix: &ClassFeatureMatrix<T>) -> Result<Vec<T>> {
    if matrix.rows() < 2 {
        return Err(Error::Parameter(format!(
            "covariance oracle needs at least 2 rows, got {}",
            matrix.rows()
        )));
    }
    let (rows, cols) = (matrix.rows(), matrix.cols());
    let z = DMatrix::from_row_slice(
        rows,
        cols,
        &matrix.data().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
    );
    let scale = if cols > 1 { 1.0 / (cols - 1) as f64 } else { 1.0 };
    let cov = (&z * z.transpose()) * scale;
    let mut eig: Vec<f64> = cov.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| b.partial_cmp(a).expect("finite eigenvalues"));
    Ok(eig.into_iter().map(|l| T::lit(l.max(0.0))).collect())
}
