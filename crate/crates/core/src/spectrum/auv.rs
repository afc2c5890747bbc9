use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{ClassId, Scalar};

/// Batch statistics of `ln(max(scale, floor))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRange {
    pub log_min: f64,
    pub log_max: f64,
}

impl LogRange {
    pub fn is_degenerate(&self) -> bool {
        self.log_max <= self.log_min
    }
}

fn check_floor<T: Scalar>(floor: T) -> Result<()> {
    if floor > T::zero() && floor.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("floor must be > 0, got {floor}")))
    }
}

pub fn log_range<T: Scalar>(scales: &[T], floor: T) -> Result<LogRange> {
    check_floor(floor)?;
    if scales.is_empty() {
        return Err(Error::Parameter("empty scale batch".into()));
    }
    let (lo, hi) = scales
        .iter()
        .map(|&s| s.max(floor).ln())
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), l| {
            (lo.min(l), hi.max(l))
        });
    Ok(LogRange {
        log_min: lo.to_f64_lossy(),
        log_max: hi.to_f64_lossy(),
    })
}

/// `1 - (ln s - min) / (max - min)`, clamped to `[0, 1]`; 0 when the range
/// is degenerate.
pub fn auv_from_range<T: Scalar>(scale: T, floor: T, range: LogRange) -> T {
    if range.is_degenerate() {
        return T::zero();
    }
    let (lo, hi) = (T::lit(range.log_min), T::lit(range.log_max));
    let rel = (scale.max(floor).ln() - lo) / (hi - lo);
    (T::one() - rel).max(T::zero()).min(T::one())
}

/// AUVs of a batch, min-max normalised over the batch itself.
pub fn auv_values<T: Scalar>(scales: &[T], floor: T) -> Result<Vec<T>> {
    check_floor(floor)?;
    if scales.is_empty() {
        return Err(Error::Parameter("empty scale batch".into()));
    }
    let logs: Vec<T> = scales.iter().map(|&s| s.max(floor).ln()).collect();
    let lo = logs.iter().copied().fold(T::infinity(), T::min);
    let hi = logs.iter().copied().fold(T::neg_infinity(), T::max);
    if hi <= lo {
        return Ok(vec![T::zero(); scales.len()]);
    }
    let span = hi - lo;
    Ok(logs
        .into_iter()
        .map(|l| (T::one() - (l - lo) / span).max(T::zero()).min(T::one()))
        .collect())
}

/// Per-class scales of one sample, before batch normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleScales {
    pub sample_id: String,
    pub per_class_scale: BTreeMap<ClassId, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuvRecord {
    pub sample_id: String,
    pub per_class_scale: BTreeMap<ClassId, f64>,
    pub sample_scale: f64,
    pub auv: f64,
}

/// Sums each sample's class scales over `subset` and normalises the batch.
/// Records keep their input order.
pub fn auv_batch(
    samples: &[SampleScales],
    subset: Option<&[ClassId]>,
    floor: f64,
) -> Result<Vec<AuvRecord>> {
    let totals = samples
        .iter()
        .map(|s| super::sample_scale(&s.per_class_scale, subset))
        .collect::<Result<Vec<f64>>>()?;
    let auvs = auv_values(&totals, floor)?;
    Ok(samples
        .iter()
        .zip(totals)
        .zip(auvs)
        .map(|((s, total), auv)| AuvRecord {
            sample_id: s.sample_id.clone(),
            per_class_scale: s.per_class_scale.clone(),
            sample_scale: total,
            auv,
        })
        .collect())
}
