//! Synthetic feature volumes with controlled rank and noise.
//!
//! Each class slab is a sum of `rank` Gaussian outer products plus isotropic
//! Gaussian noise. "Noisy" samples use a lower rank, which collapses their
//! spectral entropy the way ambiguous or corrupted images do.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{CLASSES_FILE, GROUND_TRUTH_FILE};
use crate::error::{Error, Result};
use crate::tensor::{save_feature_volume, FeatureVolume};
use crate::ClassId;

pub const SPEC_FILE: &str = "synth_spec.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_samples: usize,
    /// `(C, D, H, W)`.
    pub shape: [usize; 4],
    pub clean_rank: usize,
    pub noisy_rank: usize,
    pub frac_noisy: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_samples: 200,
            shape: [2, 16, 32, 32],
            clean_rank: 16,
            noisy_rank: 2,
            frac_noisy: 0.05,
            noise_sigma: 0.05,
            seed: 7,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let [c, d, h, w] = self.shape;
        if c == 0 || d == 0 || h * w < 2 {
            return Err(Error::Parameter(format!("bad synthetic shape {:?}", self.shape)));
        }
        let max_rank = d.min(h * w);
        if self.noisy_rank < 1 || self.clean_rank <= self.noisy_rank {
            return Err(Error::Parameter(format!(
                "need clean_rank > noisy_rank >= 1, got {} and {}",
                self.clean_rank, self.noisy_rank
            )));
        }
        if self.clean_rank > max_rank {
            return Err(Error::Parameter(format!(
                "rank {} exceeds min(D, H*W) = {max_rank}",
                self.clean_rank
            )));
        }
        if !(0.0..=1.0).contains(&self.frac_noisy) {
            return Err(Error::Parameter(format!("frac_noisy {} outside [0, 1]", self.frac_noisy)));
        }
        if self.frac_noisy > 0.0 && self.noisy_count() < 1 {
            return Err(Error::Parameter(format!(
                "frac_noisy {} of {} samples selects no noisy sample",
                self.frac_noisy, self.n_samples
            )));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::Parameter(format!("noise_sigma {} must be >= 0", self.noise_sigma)));
        }
        Ok(())
    }

    pub fn noisy_count(&self) -> usize {
        (self.frac_noisy * self.n_samples as f64 + 1e-9).floor() as usize
    }

    pub fn class_ids(&self) -> Vec<ClassId> {
        (1..=self.shape[0] as ClassId).collect()
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent per-sample seed; generation order never affects output.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index.wrapping_add(1)))
}

/// One volume with `noisy_rank` (if `is_noisy`) or `clean_rank` structure
/// per class, plus noise of standard deviation `noise_sigma`.
pub fn make_feature_volume(spec: &SynthSpec, is_noisy: bool, seed: u64) -> Result<FeatureVolume<f64>> {
    make_named_volume(spec, "synth", is_noisy, seed)
}

fn make_named_volume(
    spec: &SynthSpec,
    sample_id: &str,
    is_noisy: bool,
    seed: u64,
) -> Result<FeatureVolume<f64>> {
    let [c, d, h, w] = spec.shape;
    let cols = h * w;
    let rank = if is_noisy { spec.noisy_rank } else { spec.clean_rank };
    if rank == 0 || rank > d.min(cols) {
        return Err(Error::Parameter(format!("rank {rank} exceeds min(D, H*W) = {}", d.min(cols))));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut data = vec![0.0f64; c * d * cols];
    let mut u = vec![0.0; d];
    let mut v = vec![0.0; cols];
    for slab in data.chunks_exact_mut(d * cols) {
        for _ in 0..rank {
            u.iter_mut().for_each(|x| *x = gauss());
            v.iter_mut().for_each(|x| *x = gauss());
            for (row, &ui) in slab.chunks_exact_mut(cols).zip(&u) {
                row.iter_mut().zip(&v).for_each(|(z, &vj)| *z += ui * vj);
            }
        }
        if spec.noise_sigma > 0.0 {
            slab.iter_mut().for_each(|z| *z += spec.noise_sigma * gauss());
        }
    }
    FeatureVolume::new(sample_id, spec.class_ids(), spec.shape, data)
}

/// A generated sample with its ground-truth flag.
#[derive(Debug, Clone)]
pub struct SyntheticSample {
    pub volume: FeatureVolume<f64>,
    pub is_noisy: bool,
}

pub fn sample_id(index: usize) -> String {
    format!("sample_{index:05}")
}

/// Ground-truth flags by sample id: `noisy_count()` randomly placed noisy
/// samples, the rest clean.
pub fn noisy_flags(spec: &SynthSpec) -> Result<BTreeMap<String, bool>> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..spec.n_samples).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, u64::MAX)));
    let noisy = &order[..spec.noisy_count()];
    Ok((0..spec.n_samples)
        .map(|i| (sample_id(i), noisy.contains(&i)))
        .collect())
}

fn make_sample(spec: &SynthSpec, index: usize, is_noisy: bool) -> Result<SyntheticSample> {
    let volume = make_named_volume(
        spec,
        &sample_id(index),
        is_noisy,
        derive_seed(spec.seed, index as u64),
    )?;
    Ok(SyntheticSample { volume, is_noisy })
}

/// Generates the whole dataset in memory, ordered by sample id. Runs on the
/// current rayon pool; output does not depend on the thread count.
pub fn generate(spec: &SynthSpec) -> Result<Vec<SyntheticSample>> {
    let flags = noisy_flags(spec)?;
    let flags: Vec<bool> = flags.into_values().collect();
    flags
        .par_iter()
        .enumerate()
        .map(|(i, &noisy)| make_sample(spec, i, noisy))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one `<sample_id>.npy` per sample, the class sidecar, the
/// ground-truth sidecar, and the generator settings. Returns the ground truth.
pub fn make_dataset(spec: &SynthSpec, dir: impl AsRef<Path>) -> Result<BTreeMap<String, bool>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let truth = noisy_flags(spec)?;
    let flags: Vec<bool> = truth.values().copied().collect();
    flags
        .par_iter()
        .enumerate()
        .try_for_each(|(i, &noisy)| {
            let sample = make_sample(spec, i, noisy)?;
            save_feature_volume(&sample.volume, dir.join(format!("{}.npy", sample_id(i))))
        })?;
    let classes: BTreeMap<&String, Vec<ClassId>> =
        truth.keys().map(|id| (id, spec.class_ids())).collect();
    write_json(&dir.join(CLASSES_FILE), &classes)?;
    write_json(&dir.join(GROUND_TRUTH_FILE), &truth)?;
    write_json(&dir.join(SPEC_FILE), spec)?;
    Ok(truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{class_scale, singular_values_with, ScaleConfig, SvdMethod};
    use crate::tensor::class_matrix;

    fn small() -> SynthSpec {
        SynthSpec {
            n_samples: 20,
            shape: [2, 6, 5, 5],
            clean_rank: 6,
            noisy_rank: 1,
            frac_noisy: 0.1,
            noise_sigma: 0.0,
            seed: 3,
        }
    }

    fn rank_above(volume: &FeatureVolume<f64>, class: ClassId) -> usize {
        let m = class_matrix(volume, class, false).unwrap();
        let s = singular_values_with(&m, SvdMethod::OneSidedJacobi).unwrap();
        let top = s.values()[0];
        s.values().iter().filter(|&&x| x > 1e-8 * top).count()
    }

    #[test]
    fn rank_control_without_noise() {
        let spec = small();
        let noisy = make_feature_volume(&spec, true, 1).unwrap();
        let clean = make_feature_volume(&spec, false, 1).unwrap();
        for c in spec.class_ids() {
            assert_eq!(rank_above(&noisy, c), 1);
            assert_eq!(rank_above(&clean, c), 6);
        }
        let mid = SynthSpec {
            clean_rank: 4,
            noisy_rank: 2,
            ..small()
        };
        assert_eq!(rank_above(&make_feature_volume(&mid, false, 9).unwrap(), 1), 4);
        assert_eq!(rank_above(&make_feature_volume(&mid, true, 9).unwrap(), 2), 2);
    }

    #[test]
    fn full_rank_scale_exceeds_rank_one() {
        let spec = small();
        let cfg = ScaleConfig {
            center: false,
            ..ScaleConfig::default()
        };
        let lo = class_scale(&make_feature_volume(&spec, true, 4).unwrap(), 1, &cfg).unwrap();
        let hi = class_scale(&make_feature_volume(&spec, false, 4).unwrap(), 1, &cfg).unwrap();
        assert!(lo < 1e-6, "{lo}");
        assert!(hi > lo + 0.1, "{hi} vs {lo}");
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = small();
        let a = make_feature_volume(&spec, false, 42).unwrap();
        let b = make_feature_volume(&spec, false, 42).unwrap();
        assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn noisy_counts() {
        let spec = SynthSpec {
            n_samples: 100,
            frac_noisy: 0.05,
            ..small()
        };
        assert_eq!(noisy_flags(&spec).unwrap().values().filter(|&&b| b).count(), 5);
        let none = SynthSpec {
            frac_noisy: 0.0,
            ..small()
        };
        assert!(noisy_flags(&none).unwrap().values().all(|&b| !b));
        let too_few = SynthSpec {
            n_samples: 10,
            frac_noisy: 0.05,
            ..small()
        };
        assert!(matches!(noisy_flags(&too_few), Err(Error::Parameter(_))));
    }

    #[test]
    fn rank_validation() {
        let bad = SynthSpec {
            clean_rank: 7,
            ..small()
        };
        assert!(matches!(bad.validate(), Err(Error::Parameter(_))));
        let inverted = SynthSpec {
            clean_rank: 1,
            noisy_rank: 2,
            ..small()
        };
        assert!(inverted.validate().is_err());
        let spec = SynthSpec {
            noisy_rank: 9,
            clean_rank: 10,
            ..small()
        };
        assert!(make_feature_volume(&spec, true, 0).is_err());
    }
}
