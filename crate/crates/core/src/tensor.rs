//! Feature volumes and per-class analysis matrices.

use std::path::Path;

use crate::error::{Error, Result};
use crate::npy::{self, Dtype};
use crate::{ClassId, Scalar};

/// Decoded output of a frozen feature extractor, shape `(C, D, H, W)`,
/// stored channel-major. Channel `k` belongs to `class_ids[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVolume<T> {
    sample_id: String,
    class_ids: Vec<ClassId>,
    shape: [usize; 4],
    data: Vec<T>,
}

impl<T: Scalar> FeatureVolume<T> {
    pub fn new(
        sample_id: impl Into<String>,
        class_ids: Vec<ClassId>,
        shape: [usize; 4],
        data: Vec<T>,
    ) -> Result<Self> {
        let [c, d, h, w] = shape;
        if c == 0 || d == 0 {
            return Err(Error::Shape(format!("empty channel or depth axis in {shape:?}")));
        }
        if h * w < 2 {
            return Err(Error::Shape(format!("H*W must be at least 2, got {shape:?}")));
        }
        if class_ids.len() != c {
            return Err(Error::Shape(format!(
                "{} class ids for {c} channels",
                class_ids.len()
            )));
        }
        if data.len() != c * d * h * w {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {} values, got {}",
                c * d * h * w,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at flat index {pos}")));
        }
        Ok(Self {
            sample_id: sample_id.into(),
            class_ids,
            shape,
            data,
        })
    }

    pub fn sample_id(&self) -> &str {
        &self.sample_id
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    fn channel_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    /// The `(D, H, W)` slab for one class, flattened.
    pub fn channel(&self, class_id: ClassId) -> Result<&[T]> {
        let k = self
            .class_ids
            .iter()
            .position(|&c| c == class_id)
            .ok_or_else(|| {
                Error::Class(format!("{class_id} not in volume {}", self.sample_id))
            })?;
        let len = self.channel_len();
        Ok(&self.data[k * len..(k + 1) * len])
    }
}

/// Reads a `(C, D, H, W)` NPY file. The file stem becomes the sample id.
pub fn load_feature_volume<T: Scalar>(
    path: impl AsRef<Path>,
    class_ids: &[ClassId],
) -> Result<FeatureVolume<T>> {
    let path = path.as_ref();
    let array = npy::read_npy(path)?;
    let shape: [usize; 4] = array.shape.as_slice().try_into().map_err(|_| {
        Error::Shape(format!(
            "{}: expected rank-4 (C, D, H, W), got shape {:?}",
            path.display(),
            array.shape
        ))
    })?;
    let sample_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let class_ids = if class_ids.is_empty() {
        (0..shape[0] as ClassId).collect()
    } else {
        class_ids.to_vec()
    };
    let data = array
        .data
        .into_iter()
        .map(|v| T::from_f64(v).unwrap_or_else(T::nan))
        .collect();
    FeatureVolume::new(sample_id, class_ids, shape, data)
}

/// Writes the volume as little-endian `f32`, the on-disk format.
pub fn save_feature_volume<T: Scalar>(volume: &FeatureVolume<T>, path: impl AsRef<Path>) -> Result<()> {
    let data: Vec<f64> = volume.data.iter().map(|v| v.to_f64_lossy()).collect();
    npy::write_npy(path, Dtype::F32, &volume.shape, &data)
}

/// Row-major `D x (H*W)` matrix of one class's features.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassFeatureMatrix<T> {
    class_id: ClassId,
    rows: usize,
    cols: usize,
    data: Vec<T>,
    centered: bool,
}

impl<T: Scalar> ClassFeatureMatrix<T> {
    /// Wraps a row-major buffer. No centering is applied.
    pub fn from_rows(class_id: ClassId, rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix cannot hold {} values",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite matrix entry".into()));
        }
        Ok(Self {
            class_id,
            rows,
            cols,
            data,
            centered: false,
        })
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    /// Subtracts each row's mean in place.
    pub fn center_rows(mut self) -> Self {
        let n = T::from_usize_lossy(self.cols);
        for row in self.data.chunks_exact_mut(self.cols) {
            let mean = row.iter().copied().sum::<T>() / n;
            row.iter_mut().for_each(|v| *v -= mean);
        }
        self.centered = true;
        self
    }
}

/// Reshapes the class slab into `D x (H*W)`, optionally removing row means.
///
/// A single-row matrix has one singular value, so its semantic scale is 0
/// whether or not it is centered.
pub fn class_matrix<T: Scalar>(
    volume: &FeatureVolume<T>,
    class_id: ClassId,
    center: bool,
) -> Result<ClassFeatureMatrix<T>> {
    let slab = volume.channel(class_id)?;
    let [_, d, h, w] = volume.shape;
    let matrix = ClassFeatureMatrix {
        class_id,
        rows: d,
        cols: h * w,
        data: slab.to_vec(),
        centered: false,
    };
    Ok(if center { matrix.center_rows() } else { matrix })
}
