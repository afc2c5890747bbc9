//! Dynamic uncertainty-aware optimisation objective.
//!
//! Per sample `i` and class `c` the segmentation loss is
//! `beta * Dice + (1 - beta) * BCE` against labels denoised by a learned
//! per-sample noise scalar times a noise-head map. Each class term is
//! divided by `1 + alpha * S_c`, where `S_c` is the class's semantic scale,
//! summed over classes and averaged over samples. Forward values and exact
//! gradients are provided for use as a custom backward in a training loop.

mod gradcheck;
mod noise;
mod seg;
mod total;

use serde::{Deserialize, Serialize};

pub use gradcheck::{
    check_gradients, compare_gradients, random_case, relative_error, GradCheckCase, GradCheckReport,
    DEFAULT_FD_STEP, DEFAULT_GRAD_TOLERANCE,
};
pub use noise::{denoise_labels, standardize_noise, NoiseEstimate, DEGENERATE_VARIANCE};
pub use seg::{bce_loss, dice_loss, seg_loss, seg_loss_baseline};
pub use total::{duo_forward, duo_gradients, duo_total_loss, Gradients, LossReport};

use crate::error::{Error, Result};
use crate::{ClassId, Scalar};

/// `(N, C, V)` view of an `(N, C, D, H, W)` batch, `V = D * H * W`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchShape {
    pub samples: usize,
    pub classes: usize,
    pub voxels: usize,
}

impl BatchShape {
    pub fn from_dims(dims: [usize; 5]) -> Self {
        Self {
            samples: dims[0],
            classes: dims[1],
            voxels: dims[2] * dims[3] * dims[4],
        }
    }

    pub fn len(&self) -> usize {
        self.samples * self.classes * self.voxels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn groups(&self) -> usize {
        self.samples * self.classes
    }

    pub(crate) fn check(&self, name: &str, len: usize) -> Result<()> {
        if len == self.len() {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "{name} has {len} elements, batch shape {self:?} needs {}",
                self.len()
            )))
        }
    }
}

/// Predictions, labels, and noise-head output for one batch, all laid out
/// as `(N, C, D, H, W)` in C order.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionBatch<T> {
    dims: [usize; 5],
    class_ids: Vec<ClassId>,
    probs: Vec<T>,
    labels: Vec<T>,
    noise_head: Vec<T>,
}

impl<T: Scalar> PredictionBatch<T> {
    /// Class ids default to `0..C`.
    pub fn new(dims: [usize; 5], probs: Vec<T>, labels: Vec<T>, noise_head: Vec<T>) -> Result<Self> {
        let class_ids = (0..dims[1] as ClassId).collect();
        Self::with_class_ids(dims, class_ids, probs, labels, noise_head)
    }

    pub fn with_class_ids(
        dims: [usize; 5],
        class_ids: Vec<ClassId>,
        probs: Vec<T>,
        labels: Vec<T>,
        noise_head: Vec<T>,
    ) -> Result<Self> {
        let shape = BatchShape::from_dims(dims);
        if shape.is_empty() {
            return Err(Error::Shape(format!("empty batch {dims:?}")));
        }
        if class_ids.len() != shape.classes {
            return Err(Error::Shape(format!(
                "{} class ids for {} classes",
                class_ids.len(),
                shape.classes
            )));
        }
        shape.check("probs", probs.len())?;
        shape.check("labels", labels.len())?;
        shape.check("noise_head", noise_head.len())?;
        if probs.iter().any(|&p| !(p >= T::zero() && p <= T::one())) {
            return Err(Error::Data("probabilities must lie in [0, 1]".into()));
        }
        if labels.iter().any(|&y| y != T::zero() && y != T::one()) {
            return Err(Error::Data("labels must be binary".into()));
        }
        if noise_head.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite noise-head value".into()));
        }
        Ok(Self {
            dims,
            class_ids,
            probs,
            labels,
            noise_head,
        })
    }

    pub fn dims(&self) -> [usize; 5] {
        self.dims
    }

    pub fn shape(&self) -> BatchShape {
        BatchShape::from_dims(self.dims)
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn labels(&self) -> &[T] {
        &self.labels
    }

    pub fn noise_head(&self) -> &[T] {
        &self.noise_head
    }

    pub(crate) fn probs_mut(&mut self) -> &mut [T] {
        &mut self.probs
    }

    pub(crate) fn noise_head_mut(&mut self) -> &mut [T] {
        &mut self.noise_head
    }
}

/// Hyperparameters of the objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuoConfig<T> {
    /// Strength of the semantic-scale down-weighting.
    pub alpha: T,
    /// Dice share of the segmentation loss.
    pub beta: T,
    /// Dice smoothing constant.
    pub smooth: T,
    /// BCE probability clamp.
    pub clamp: T,
    /// Cap on the magnitude of the label correction.
    pub gamma: T,
}

impl<T: Scalar> Default for DuoConfig<T> {
    fn default() -> Self {
        Self {
            alpha: T::one(),
            beta: T::lit(0.5),
            smooth: T::one(),
            clamp: T::lit(1e-7),
            gamma: T::lit(0.5),
        }
    }
}

impl<T: Scalar> DuoConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: T| Err(Error::Parameter(format!("{what} out of range: {v}")));
        if !(self.alpha >= T::zero()) || !self.alpha.is_finite() {
            return bad("alpha", self.alpha);
        }
        if !(self.beta >= T::zero() && self.beta <= T::one()) {
            return bad("beta", self.beta);
        }
        if !(self.smooth >= T::zero()) || !self.smooth.is_finite() {
            return bad("smooth", self.smooth);
        }
        if !(self.clamp > T::zero() && self.clamp < T::lit(0.5)) {
            return bad("clamp", self.clamp);
        }
        if !(self.gamma >= T::zero()) || !self.gamma.is_finite() {
            return bad("gamma", self.gamma);
        }
        Ok(())
    }
}
