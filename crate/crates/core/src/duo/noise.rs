use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

use super::BatchShape;

/// Population variance below which the moment constraints are unsatisfiable
/// and the estimate collapses to zeros.
pub const DEGENERATE_VARIANCE: f64 = 1e-24;

/// Per-sample noise scalars with zero mean and unit mean square.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate<T> {
    values: Vec<T>,
    std: T,
    degenerate: bool,
}

impl<T: Scalar> NoiseEstimate<T> {
    /// All-zero estimate (no label correction).
    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
            std: T::zero(),
            degenerate: true,
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    /// Population standard deviation of the raw input.
    pub fn std(&self) -> T {
        self.std
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `(raw - mean) / std` with the population standard deviation.
pub fn standardize_noise<T: Scalar>(raw: &[T]) -> NoiseEstimate<T> {
    let n = T::from_usize_lossy(raw.len().max(1));
    let mean = raw.iter().copied().sum::<T>() / n;
    let var = raw.iter().map(|&r| (r - mean) * (r - mean)).sum::<T>() / n;
    if raw.is_empty() || !(var >= T::lit(DEGENERATE_VARIANCE)) {
        return NoiseEstimate::zeros(raw.len());
    }
    let std = var.sqrt();
    NoiseEstimate {
        values: raw.iter().map(|&r| (r - mean) / std).collect(),
        std,
        degenerate: false,
    }
}

/// Label correction `e_i * head`, clipped to `[-gamma, gamma]`.
#[inline]
pub(crate) fn clipped_correction<T: Scalar>(e: T, head: T, gamma: T) -> T {
    (e * head).max(-gamma).min(gamma)
}

/// `clip(y - clip(e_i * head, -gamma, gamma), 0, 1)` per voxel.
pub fn denoise_labels<T: Scalar>(
    labels: &[T],
    noise: &NoiseEstimate<T>,
    noise_head: &[T],
    shape: BatchShape,
    gamma: T,
) -> Result<Vec<T>> {
    shape.check("labels", labels.len())?;
    shape.check("noise_head", noise_head.len())?;
    if noise.len() != shape.samples {
        return Err(Error::Shape(format!(
            "{} noise values for {} samples",
            noise.len(),
            shape.samples
        )));
    }
    if !(gamma >= T::zero()) {
        return Err(Error::Parameter(format!("gamma must be >= 0, got {gamma}")));
    }
    let per_sample = shape.classes * shape.voxels;
    Ok(labels
        .iter()
        .zip(noise_head)
        .enumerate()
        .map(|(k, (&y, &h))| {
            let e = noise.values[k / per_sample];
            (y - clipped_correction(e, h, gamma)).max(T::zero()).min(T::one())
        })
        .collect())
}
