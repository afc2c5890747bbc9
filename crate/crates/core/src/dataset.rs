//! Feature-volume directories: one `<sample_id>.npy` per sample plus
//! optional JSON sidecars.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectrum::{volume_scales, SampleScales, ScaleConfig};
use crate::tensor::{load_feature_volume, FeatureVolume};
use crate::ClassId;

/// Sidecar mapping `sample_id -> [class ids]`, one per channel.
pub const CLASSES_FILE: &str = "classes.json";
/// Sidecar mapping `sample_id -> is_noisy` for synthetic datasets.
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// `.npy` files in `dir`, sorted by file name.
pub fn list_volumes(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && path.extension().is_some_and(|ext| ext == "npy") {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

fn read_json_map<V: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<BTreeMap<String, V>>> {
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

pub fn read_class_sidecar(dir: impl AsRef<Path>) -> Result<Option<BTreeMap<String, Vec<ClassId>>>> {
    read_json_map(&dir.as_ref().join(CLASSES_FILE))
}

pub fn read_ground_truth(dir: impl AsRef<Path>) -> Result<BTreeMap<String, bool>> {
    let path = dir.as_ref().join(GROUND_TRUTH_FILE);
    read_json_map(&path)?
        .ok_or_else(|| Error::Format(format!("{} not found", path.display())))
}

/// Per-file scoring failure; the file is skipped.
#[derive(Debug)]
pub struct ScoreFailure {
    pub path: PathBuf,
    pub error: Error,
}

#[derive(Debug, Default)]
pub struct ScoreOutcome {
    /// Sorted by sample id.
    pub scales: Vec<SampleScales>,
    pub failures: Vec<ScoreFailure>,
}

fn score_file(
    path: &Path,
    sidecar: Option<&BTreeMap<String, Vec<ClassId>>>,
    config: &ScaleConfig,
) -> Result<SampleScales> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let classes = sidecar
        .and_then(|m| m.get(&stem))
        .map(Vec::as_slice)
        .unwrap_or(&[]);
    let volume: FeatureVolume<f64> = load_feature_volume(path, classes)?;
    Ok(SampleScales {
        sample_id: volume.sample_id().to_owned(),
        per_class_scale: volume_scales(&volume, config)?,
    })
}

/// Scores every volume in `dir` on the current rayon pool. Results are
/// merged in file-name order, so output is independent of thread count.
pub fn score_directory(dir: impl AsRef<Path>, config: &ScaleConfig) -> Result<ScoreOutcome> {
    let dir = dir.as_ref();
    let paths = list_volumes(dir)?;
    let sidecar = read_class_sidecar(dir)?;
    let results: Vec<(PathBuf, Result<SampleScales>)> = paths
        .into_par_iter()
        .map(|p| {
            let r = score_file(&p, sidecar.as_ref(), config);
            (p, r)
        })
        .collect();
    let mut outcome = ScoreOutcome::default();
    for (path, result) in results {
        match result {
            Ok(s) => outcome.scales.push(s),
            Err(error) => outcome.failures.push(ScoreFailure { path, error }),
        }
    }
    outcome.scales.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(outcome)
}

/// Scores in-memory volumes in parallel, preserving input order.
pub fn score_volumes(volumes: &[FeatureVolume<f64>], config: &ScaleConfig) -> Result<Vec<SampleScales>> {
    volumes
        .par_iter()
        .map(|v| {
            Ok(SampleScales {
                sample_id: v.sample_id().to_owned(),
                per_class_scale: volume_scales(v, config)?,
            })
        })
        .collect()
}
