//! Singular spectra, energy distributions, and the semantic scale.
//!
//! The semantic scale of a class is the Shannon entropy of its normalised
//! squared singular values divided by `ln r`. Rich, full-rank features give
//! a scale near 1; collapsed, low-rank features give a scale near 0.

mod auv;
mod curves;
mod oracle;
mod svd;

use std::collections::BTreeMap;

pub use auv::{auv_batch, auv_from_range, auv_values, log_range, AuvRecord, LogRange, SampleScales};
pub use curves::{
    curve_rows, export_labeled_curves, export_spectrum_curves, write_spectrum_curves, CurveRow,
};
pub use oracle::covariance_eigenvalues_oracle;
pub use svd::{singular_values, singular_values_with, SvdMethod, GRAM_MAX_DIM};

use crate::error::{Error, Result};
use crate::tensor::{class_matrix, FeatureVolume};
use crate::{ClassId, Scalar};

/// Default smoothing added to the total energy.
pub const DEFAULT_EPSILON: f64 = 1e-12;
/// Default lower clamp applied to sample scales before taking logs.
pub const DEFAULT_FLOOR: f64 = 1e-12;

/// Non-increasing, non-negative singular values.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSpectrum<T> {
    values: Vec<T>,
}

impl<T: Scalar> SingularSpectrum<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Parameter("empty singular spectrum".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::Data("singular values must be finite and non-negative".into()));
        }
        if values.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Data("singular values must be non-increasing".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Squared Frobenius norm of the source matrix.
    pub fn total_energy(&self) -> T {
        self.values.iter().map(|&s| s * s).sum()
    }
}

/// Normalised squared singular values `p_j = s_j^2 / (sum s^2 + epsilon)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergySpectrum<T> {
    probs: Vec<T>,
    epsilon: T,
}

impl<T: Scalar> EnergySpectrum<T> {
    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn rank(&self) -> usize {
        self.probs.len()
    }
}

pub fn energy_distribution<T: Scalar>(
    spectrum: &SingularSpectrum<T>,
    epsilon: T,
) -> Result<EnergySpectrum<T>> {
    if !(epsilon >= T::zero()) || !epsilon.is_finite() {
        return Err(Error::Parameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let denom = spectrum.total_energy() + epsilon;
    let probs = if denom > T::zero() {
        spectrum.values.iter().map(|&s| s * s / denom).collect()
    } else {
        vec![T::zero(); spectrum.len()]
    };
    Ok(EnergySpectrum { probs, epsilon })
}

/// Normalised Shannon entropy in `[0, 1]`, natural log, `0 ln 0 = 0`.
///
/// Returns 0 for a single mode and for an all-zero distribution.
pub fn semantic_scale<T: Scalar>(energy: &EnergySpectrum<T>) -> T {
    let r = energy.rank();
    if r <= 1 || energy.probs.iter().all(|&p| p == T::zero()) {
        return T::zero();
    }
    // equal masses: entropy is ln r by definition; summing would round
    if energy.probs.iter().all(|&p| p == energy.probs[0]) {
        return T::one();
    }
    let entropy: T = energy
        .probs
        .iter()
        .filter(|&&p| p > T::zero())
        .map(|&p| -p * p.ln())
        .sum();
    // a sub-normalised distribution (epsilon > 0) can overshoot ln 2 when r = 2
    (entropy / T::from_usize_lossy(r).ln()).max(T::zero()).min(T::one())
}

/// Sum of per-class scales, optionally restricted to `subset`.
pub fn sample_scale<T: Scalar>(
    per_class: &BTreeMap<ClassId, T>,
    subset: Option<&[ClassId]>,
) -> Result<T> {
    if per_class.is_empty() {
        return Err(Error::Parameter("no per-class scales".into()));
    }
    match subset {
        None => Ok(per_class.values().copied().sum()),
        Some(classes) => {
            if classes.is_empty() {
                return Err(Error::Parameter("empty class subset".into()));
            }
            classes
                .iter()
                .map(|c| {
                    per_class
                        .get(c)
                        .copied()
                        .ok_or_else(|| Error::Class(format!("no scale for class {c}")))
                })
                .sum()
        }
    }
}

/// Settings for turning a feature volume into per-class scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleConfig {
    pub epsilon: f64,
    pub center: bool,
    pub method: SvdMethod,
    /// Classes to score; `None` scores every channel.
    pub classes: Option<Vec<ClassId>>,
}

impl Default for ScaleConfig {
    fn default() -> Self {
        Self {
            epsilon: DEFAULT_EPSILON,
            center: true,
            method: SvdMethod::Auto,
            classes: None,
        }
    }
}

/// Semantic scale of one class of a volume.
pub fn class_scale<T: Scalar>(
    volume: &FeatureVolume<T>,
    class_id: ClassId,
    config: &ScaleConfig,
) -> Result<T> {
    let matrix = class_matrix(volume, class_id, config.center)?;
    let spectrum = singular_values_with(&matrix, config.method)?;
    let energy = energy_distribution(&spectrum, T::lit(config.epsilon))?;
    Ok(semantic_scale(&energy))
}

/// Per-class scales for every selected class present in the volume.
pub fn volume_scales<T: Scalar>(
    volume: &FeatureVolume<T>,
    config: &ScaleConfig,
) -> Result<BTreeMap<ClassId, T>> {
    let classes: Vec<ClassId> = match &config.classes {
        None => volume.class_ids().to_vec(),
        Some(subset) => subset
            .iter()
            .copied()
            .filter(|c| volume.class_ids().contains(c))
            .collect(),
    };
    if classes.is_empty() {
        return Err(Error::Class(format!(
            "volume {} has none of the selected classes",
            volume.sample_id()
        )));
    }
    classes
        .into_iter()
        .map(|c| class_scale(volume, c, config).map(|s| (c, s)))
        .collect()
}
