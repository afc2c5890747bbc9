//! JSON-Lines files exchanged between pipeline stages.
//!
//! Every file starts with a header object carrying a `schema` tag, followed
//! by one object per sample in `sample_id` order.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filtering::{ClassCombine, FilterManifest, ManifestEntry, Strategy, ThresholdKey};
use crate::spectrum::{AuvRecord, LogRange};
use crate::{ClassId, VERSION};

pub const RECORDS_SCHEMA: &str = "auv-records/1";
pub const MANIFEST_SCHEMA: &str = "auv-manifest/1";
pub const STATS_SCHEMA: &str = "auv-stats/1";

/// Where the min/max log-scale statistics came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatsSource {
    Batch,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordsHeader {
    pub schema: String,
    pub tool_version: String,
    pub epsilon: f64,
    pub floor: f64,
    pub center: bool,
    pub classes: Option<Vec<ClassId>>,
    pub log_min: f64,
    pub log_max: f64,
    pub stats: StatsSource,
    pub count: usize,
}

impl RecordsHeader {
    pub fn new(
        epsilon: f64,
        floor: f64,
        center: bool,
        classes: Option<Vec<ClassId>>,
        range: LogRange,
        stats: StatsSource,
        count: usize,
    ) -> Self {
        Self {
            schema: RECORDS_SCHEMA.into(),
            tool_version: VERSION.into(),
            epsilon,
            floor,
            center,
            classes,
            log_min: range.log_min,
            log_max: range.log_max,
            stats,
            count,
        }
    }
}

/// Frozen normalisation statistics, reusable on held-out batches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsFile {
    pub schema: String,
    pub tool_version: String,
    pub log_min: f64,
    pub log_max: f64,
    pub floor: f64,
    pub epsilon: f64,
    pub classes: Option<Vec<ClassId>>,
}

impl StatsFile {
    pub fn new(range: LogRange, floor: f64, epsilon: f64, classes: Option<Vec<ClassId>>) -> Self {
        Self {
            schema: STATS_SCHEMA.into(),
            tool_version: VERSION.into(),
            log_min: range.log_min,
            log_max: range.log_max,
            floor,
            epsilon,
            classes,
        }
    }

    pub fn range(&self) -> LogRange {
        LogRange {
            log_min: self.log_min,
            log_max: self.log_max,
        }
    }
}

fn json_line<W: Write, T: Serialize>(out: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *out, value)?;
    out.write_all(b"\n")
}

fn check_schema(found: &str, expected: &str, path: &Path) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Format(format!(
            "{}: schema {found:?}, expected {expected:?}",
            path.display()
        )))
    }
}

fn parse_line<T: serde::de::DeserializeOwned>(line: &str, path: &Path, lineno: usize) -> Result<T> {
    serde_json::from_str(line)
        .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), lineno + 1)))
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<String> = text.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect();
    if lines.is_empty() {
        return Err(Error::Format(format!("{}: empty file", path.display())));
    }
    Ok(lines)
}

pub fn write_records<W: Write>(header: &RecordsHeader, records: &[AuvRecord], mut out: W) -> std::io::Result<()> {
    json_line(&mut out, header)?;
    for r in records {
        json_line(&mut out, r)?;
    }
    out.flush()
}

pub fn read_records(path: impl AsRef<Path>) -> Result<(RecordsHeader, Vec<AuvRecord>)> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let header: RecordsHeader = parse_line(&lines[0], path, 0)?;
    check_schema(&header.schema, RECORDS_SCHEMA, path)?;
    let records = lines[1..]
        .iter()
        .enumerate()
        .map(|(i, l)| parse_line(l, path, i + 1))
        .collect::<Result<Vec<AuvRecord>>>()?;
    Ok((header, records))
}

pub fn write_stats(path: impl AsRef<Path>, stats: &StatsFile) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(stats)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_stats(path: impl AsRef<Path>) -> Result<StatsFile> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stats: StatsFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    check_schema(&stats.schema, STATS_SCHEMA, path)?;
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub schema: String,
    pub tool_version: String,
    pub strategy: Strategy,
    pub quantile: f64,
    pub combine: ClassCombine,
    pub classes: Option<Vec<ClassId>>,
    pub epsilon: f64,
    pub floor: f64,
    pub thresholds: BTreeMap<ThresholdKey, f64>,
    pub retained: usize,
    pub total: usize,
}

/// One manifest line as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLine {
    pub sample_id: String,
    pub auv: f64,
    pub per_class_auv: BTreeMap<ClassId, f64>,
    pub retained: bool,
    pub reason: Option<ThresholdKey>,
    pub strategy: Strategy,
    pub quantile: f64,
    /// Thresholds that applied to this sample.
    pub thresholds: BTreeMap<ThresholdKey, f64>,
}

fn entry_thresholds(manifest: &FilterManifest, entry: &ManifestEntry) -> BTreeMap<ThresholdKey, f64> {
    if manifest.strategy.is_per_class() {
        entry
            .per_class_auv
            .keys()
            .filter_map(|&c| {
                let key = ThresholdKey::Class(c);
                manifest.thresholds.get(&key).map(|&t| (key, t))
            })
            .collect()
    } else {
        manifest.thresholds.clone()
    }
}

pub fn write_manifest<W: Write>(
    manifest: &FilterManifest,
    classes: Option<Vec<ClassId>>,
    epsilon: f64,
    floor: f64,
    mut out: W,
) -> std::io::Result<()> {
    let header = ManifestHeader {
        schema: MANIFEST_SCHEMA.into(),
        tool_version: VERSION.into(),
        strategy: manifest.strategy,
        quantile: manifest.quantile,
        combine: manifest.combine,
        classes,
        epsilon,
        floor,
        thresholds: manifest.thresholds.clone(),
        retained: manifest.retained_count(),
        total: manifest.entries.len(),
    };
    json_line(&mut out, &header)?;
    for e in &manifest.entries {
        let line = ManifestLine {
            sample_id: e.sample_id.clone(),
            auv: e.auv,
            per_class_auv: e.per_class_auv.clone(),
            retained: e.retained,
            reason: e.reason,
            strategy: manifest.strategy,
            quantile: manifest.quantile,
            thresholds: entry_thresholds(manifest, e),
        };
        json_line(&mut out, &line)?;
    }
    out.flush()
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<(ManifestHeader, Vec<ManifestLine>)> {
    let path = path.as_ref();
    let lines = read_lines(path)?;
    let header: ManifestHeader = parse_line(&lines[0], path, 0)?;
    check_schema(&header.schema, MANIFEST_SCHEMA, path)?;
    let entries = lines[1..]
        .iter()
        .enumerate()
        .map(|(i, l)| parse_line(l, path, i + 1))
        .collect::<Result<Vec<ManifestLine>>>()?;
    Ok((header, entries))
}
