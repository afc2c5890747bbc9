//! Quantile-based retain/drop decisions over AUV batches.
//!
//! A sample is kept when its AUV is at or below the empirical `p`-quantile
//! of the batch. The per-class variant normalises and thresholds each class
//! column independently.

mod histogram;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use histogram::{export_histogram, histogram_bins, write_histogram, HistogramBin};

use crate::error::{Error, Result};
use crate::spectrum::{auv_values, AuvRecord};
use crate::{ClassId, Scalar};

/// Input provenance and thresholding scope. The `raw` variants score
/// features of the unprocessed image, `normalized` variants score features
/// of the mask-normalised image; the arithmetic is identical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GlobalRaw,
    GlobalNormalized,
    PerClassRaw,
    PerClassNormalized,
}

impl Strategy {
    pub fn is_per_class(self) -> bool {
        matches!(self, Strategy::PerClassRaw | Strategy::PerClassNormalized)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::GlobalRaw => "global_raw",
            Strategy::GlobalNormalized => "global_normalized",
            Strategy::PerClassRaw => "per_class_raw",
            Strategy::PerClassNormalized => "per_class_normalized",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "global_raw" | "a" => Ok(Strategy::GlobalRaw),
            "global_normalized" | "b" => Ok(Strategy::GlobalNormalized),
            "per_class_raw" | "c" => Ok(Strategy::PerClassRaw),
            "per_class_normalized" | "d" => Ok(Strategy::PerClassNormalized),
            other => Err(Error::Parameter(format!("unknown strategy {other:?}"))),
        }
    }
}

/// Which threshold governs a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ThresholdKey {
    Global,
    Class(ClassId),
}

impl fmt::Display for ThresholdKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdKey::Global => f.write_str("GLOBAL"),
            ThresholdKey::Class(c) => write!(f, "{c}"),
        }
    }
}

impl From<ThresholdKey> for String {
    fn from(key: ThresholdKey) -> String {
        key.to_string()
    }
}

impl TryFrom<String> for ThresholdKey {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "GLOBAL" {
            return Ok(ThresholdKey::Global);
        }
        s.parse()
            .map(ThresholdKey::Class)
            .map_err(|_| format!("bad threshold key {s:?}"))
    }
}

/// How per-class verdicts combine for samples carrying several classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassCombine {
    /// Keep only if every selected class present passes.
    #[default]
    All,
    /// Keep if any selected class present passes.
    Any,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub sample_id: String,
    pub auv: f64,
    pub per_class_auv: BTreeMap<ClassId, f64>,
    pub retained: bool,
    /// Threshold that dropped the sample; `None` when retained.
    pub reason: Option<ThresholdKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterManifest {
    pub strategy: Strategy,
    pub quantile: f64,
    pub combine: ClassCombine,
    pub thresholds: BTreeMap<ThresholdKey, f64>,
    /// Sorted by `sample_id`.
    pub entries: Vec<ManifestEntry>,
}

impl FilterManifest {
    pub fn retained_ids(&self) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| e.retained)
            .map(|e| e.sample_id.as_str())
            .collect()
    }

    pub fn retained_count(&self) -> usize {
        self.entries.iter().filter(|e| e.retained).count()
    }

    pub fn dropped_ids(&self) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| !e.retained)
            .map(|e| e.sample_id.as_str())
            .collect()
    }
}

fn check_quantile(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("quantile must lie in (0, 1], got {p}")))
    }
}

/// Smallest observed value `a` with `#{x <= a} / N >= p` (inverse of the
/// right-continuous empirical CDF).
pub fn quantile_threshold<T: Scalar>(values: &[T], p: f64) -> Result<T> {
    check_quantile(p)?;
    if values.is_empty() {
        return Err(Error::Parameter("empty AUV list".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Data("NaN in AUV list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN filtered above"));
    let n = sorted.len() as f64;
    for i in 0..sorted.len() {
        if i + 1 < sorted.len() && sorted[i + 1] == sorted[i] {
            continue;
        }
        if (i + 1) as f64 / n >= p {
            return Ok(sorted[i]);
        }
    }
    Ok(sorted[sorted.len() - 1])
}

fn sorted_records(records: &[AuvRecord]) -> Vec<&AuvRecord> {
    let mut sorted: Vec<&AuvRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    sorted
}

/// Keeps samples whose batch AUV is at or below the global quantile.
pub fn filter_global(records: &[AuvRecord], p: f64, strategy: Strategy) -> Result<FilterManifest> {
    let auvs: Vec<f64> = records.iter().map(|r| r.auv).collect();
    let threshold = quantile_threshold(&auvs, p)?;
    let entries = sorted_records(records)
        .into_iter()
        .map(|r| {
            let retained = r.auv <= threshold;
            ManifestEntry {
                sample_id: r.sample_id.clone(),
                auv: r.auv,
                per_class_auv: BTreeMap::new(),
                retained,
                reason: (!retained).then_some(ThresholdKey::Global),
            }
        })
        .collect();
    Ok(FilterManifest {
        strategy,
        quantile: p,
        combine: ClassCombine::All,
        thresholds: [(ThresholdKey::Global, threshold)].into(),
        entries,
    })
}

/// Per-class filtering. Each class column (samples carrying that class) is
/// normalised with [`auv_values`] and thresholded at its own quantile.
///
/// Samples carrying none of `classes` are kept under [`ClassCombine::All`]
/// (nothing to reject them on) and dropped without a reason under
/// [`ClassCombine::Any`].
pub fn filter_per_class(
    records: &[AuvRecord],
    p: f64,
    classes: &[ClassId],
    floor: f64,
    combine: ClassCombine,
    strategy: Strategy,
) -> Result<FilterManifest> {
    check_quantile(p)?;
    if records.is_empty() {
        return Err(Error::Parameter("no records to filter".into()));
    }
    if classes.is_empty() {
        return Err(Error::Parameter("no classes selected".into()));
    }
    let mut class_auv: BTreeMap<ClassId, BTreeMap<&str, f64>> = BTreeMap::new();
    let mut thresholds = BTreeMap::new();
    for &c in classes {
        let members: Vec<(&str, f64)> = records
            .iter()
            .filter_map(|r| r.per_class_scale.get(&c).map(|&s| (r.sample_id.as_str(), s)))
            .collect();
        if members.is_empty() {
            return Err(Error::Class(format!("class {c} absent from every record")));
        }
        let scales: Vec<f64> = members.iter().map(|m| m.1).collect();
        let auvs = auv_values(&scales, floor)?;
        thresholds.insert(ThresholdKey::Class(c), quantile_threshold(&auvs, p)?);
        class_auv.insert(
            c,
            members.iter().map(|m| m.0).zip(auvs).collect(),
        );
    }

    let entries = sorted_records(records)
        .into_iter()
        .map(|r| {
            let mut per_class_auv = BTreeMap::new();
            let mut first_fail = None;
            let mut any_pass = false;
            for &c in classes {
                let Some(&a) = class_auv[&c].get(r.sample_id.as_str()) else {
                    continue;
                };
                per_class_auv.insert(c, a);
                if a <= thresholds[&ThresholdKey::Class(c)] {
                    any_pass = true;
                } else if first_fail.is_none() {
                    first_fail = Some(ThresholdKey::Class(c));
                }
            }
            let retained = match combine {
                ClassCombine::All => first_fail.is_none(),
                ClassCombine::Any => any_pass,
            };
            ManifestEntry {
                sample_id: r.sample_id.clone(),
                auv: r.auv,
                per_class_auv,
                retained,
                reason: if retained { None } else { first_fail },
            }
        })
        .collect();
    Ok(FilterManifest {
        strategy,
        quantile: p,
        combine,
        thresholds,
        entries,
    })
}
