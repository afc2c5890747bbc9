//! Singular values of small-by-wide matrices.
//!
//! Two routes are provided. The Gram route forms the `k x k` Gram matrix on
//! the short side and diagonalises it with cyclic Jacobi rotations; the
//! one-sided (Hestenes) route orthogonalises the short-side vectors in
//! place and keeps full relative accuracy for tiny singular values.

use crate::error::{Error, Result};
use crate::tensor::ClassFeatureMatrix;
use crate::Scalar;

use super::SingularSpectrum;

const MAX_SWEEPS: usize = 60;

/// Short side at or below which [`SvdMethod::Auto`] picks the Gram route.
pub const GRAM_MAX_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SvdMethod {
    /// Gram route when the short side is at most [`GRAM_MAX_DIM`], one-sided
    /// Jacobi otherwise. Falls back to one-sided Jacobi if the Gram route
    /// fails to converge.
    #[default]
    Auto,
    Gram,
    OneSidedJacobi,
}

/// All `min(rows, cols)` singular values, non-increasing.
pub fn singular_values<T: Scalar>(matrix: &ClassFeatureMatrix<T>) -> Result<SingularSpectrum<T>> {
    singular_values_with(matrix, SvdMethod::Auto)
}

pub fn singular_values_with<T: Scalar>(
    matrix: &ClassFeatureMatrix<T>,
    method: SvdMethod,
) -> Result<SingularSpectrum<T>> {
    if matrix.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::Data("non-finite matrix entry".into()));
    }
    let short = matrix.rows().min(matrix.cols());
    let mut values = match method {
        SvdMethod::Gram => gram_route(matrix)?,
        SvdMethod::OneSidedJacobi => one_sided_route(matrix)?,
        SvdMethod::Auto if short <= GRAM_MAX_DIM => match gram_route(matrix) {
            Ok(v) => v,
            Err(Error::Numerical(_)) => one_sided_route(matrix)?,
            Err(e) => return Err(e),
        },
        SvdMethod::Auto => one_sided_route(matrix)?,
    };
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    SingularSpectrum::new(values)
}

/// Short-side vectors of the matrix as separate buffers.
fn short_side_vectors<T: Scalar>(matrix: &ClassFeatureMatrix<T>) -> Vec<Vec<T>> {
    let (rows, cols) = (matrix.rows(), matrix.cols());
    if rows <= cols {
        (0..rows).map(|i| matrix.row(i).to_vec()).collect()
    } else {
        (0..cols)
            .map(|j| (0..rows).map(|i| matrix.get(i, j)).collect())
            .collect()
    }
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn gram_route<T: Scalar>(matrix: &ClassFeatureMatrix<T>) -> Result<Vec<T>> {
    let vecs = short_side_vectors(matrix);
    let k = vecs.len();
    let mut gram = vec![T::zero(); k * k];
    for i in 0..k {
        for j in i..k {
            let g = dot(&vecs[i], &vecs[j]);
            gram[i * k + j] = g;
            gram[j * k + i] = g;
        }
    }
    let eig = symmetric_eigenvalues(&mut gram, k)?;
    Ok(eig.into_iter().map(|l| l.max(T::zero()).sqrt()).collect())
}

/// Eigenvalues of a dense symmetric matrix by cyclic Jacobi rotations.
/// `a` is row-major `n x n` and is overwritten.
pub(crate) fn symmetric_eigenvalues<T: Scalar>(a: &mut [T], n: usize) -> Result<Vec<T>> {
    debug_assert_eq!(a.len(), n * n);
    let eps = T::epsilon();
    for _ in 0..MAX_SWEEPS {
        let mut off = T::zero();
        let mut total = T::zero();
        for i in 0..n {
            for j in 0..n {
                let v = a[i * n + j] * a[i * n + j];
                total += v;
                if i != j {
                    off += v;
                }
            }
        }
        if off <= eps * eps * total || off == T::zero() {
            return Ok((0..n).map(|i| a[i * n + i]).collect());
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                if apq.abs() <= eps * (app.abs() * aqq.abs()).sqrt() * T::lit(0.5) {
                    a[p * n + q] = T::zero();
                    a[q * n + p] = T::zero();
                    continue;
                }
                let theta = (aqq - app) / (apq + apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = T::zero();
                a[q * n + p] = T::zero();
            }
        }
    }
    Err(Error::Numerical(format!(
        "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn one_sided_route<T: Scalar>(matrix: &ClassFeatureMatrix<T>) -> Result<Vec<T>> {
    let mut vecs = short_side_vectors(matrix);
    let k = vecs.len();
    let eps = T::epsilon();
    let mut norms: Vec<T> = vecs.iter().map(|v| dot(v, v)).collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha == T::zero() || beta == T::zero() {
                    continue;
                }
                let (left, right) = vecs.split_at_mut(q);
                let (vp, vq) = (&mut left[p], &mut right[0]);
                let gamma = dot(vp, vq);
                if gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (zeta * zeta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = c * t;
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
                norms[p] = dot(vp, vp);
                norms[q] = dot(vq, vq);
            }
        }
        if !rotated {
            return Ok(norms.into_iter().map(|n| n.sqrt()).collect());
        }
    }
    Err(Error::Numerical(format!(
        "one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
    )))
}
