use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{ClassId, Scalar};

use super::noise::clipped_correction;
use super::seg::{bce_group, dice_group};
use super::{standardize_noise, DuoConfig, NoiseEstimate, PredictionBatch};

/// Gradients of the total loss. Element layout matches the batch tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients<T> {
    pub probs: Vec<T>,
    pub noise_head: Vec<T>,
    /// With respect to the standardised noise values.
    pub epsilon_hat: Vec<T>,
    /// With respect to the raw noise parameters, through the standardisation.
    pub epsilon_raw: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport<T> {
    pub total: T,
    /// `1 / (1 + alpha * S_c)`.
    pub per_class_weight: BTreeMap<ClassId, T>,
    /// Unweighted segmentation loss per class, averaged over samples.
    pub per_class_seg_loss: BTreeMap<ClassId, T>,
    pub config: DuoConfig<T>,
    pub noise_degenerate: bool,
    pub grads: Gradients<T>,
}

fn class_denominators<T: Scalar>(
    batch: &PredictionBatch<T>,
    scales: &BTreeMap<ClassId, T>,
    alpha: T,
) -> Result<Vec<T>> {
    batch
        .class_ids()
        .iter()
        .map(|c| {
            let s = *scales
                .get(c)
                .ok_or_else(|| Error::Class(format!("no semantic scale for class {c}")))?;
            if !(s >= T::zero()) || !s.is_finite() {
                return Err(Error::Parameter(format!("scale for class {c} must be >= 0, got {s}")));
            }
            Ok(T::one() + alpha * s)
        })
        .collect()
}

fn check_inputs<T: Scalar>(
    batch: &PredictionBatch<T>,
    noise: &NoiseEstimate<T>,
    config: &DuoConfig<T>,
) -> Result<()> {
    config.validate()?;
    let n = batch.shape().samples;
    if noise.len() != n {
        return Err(Error::Shape(format!("{} noise values for {n} samples", noise.len())));
    }
    Ok(())
}

struct Evaluation<T> {
    total: T,
    class_loss: Vec<T>,
    grads: Option<Gradients<T>>,
}

fn evaluate<T: Scalar>(
    batch: &PredictionBatch<T>,
    noise: &NoiseEstimate<T>,
    denominators: &[T],
    config: &DuoConfig<T>,
    with_grads: bool,
) -> Evaluation<T> {
    let shape = batch.shape();
    let (nc, v) = (shape.classes, shape.voxels);
    let DuoConfig {
        beta,
        smooth,
        clamp,
        gamma,
        ..
    } = *config;
    let one = T::one();
    let two = T::lit(2.0);
    let n_samples = T::from_usize_lossy(shape.samples);
    let inv_v = one / T::from_usize_lossy(v);
    let hi = one - clamp;

    let mut grads = with_grads.then(|| Gradients {
        probs: vec![T::zero(); shape.len()],
        noise_head: vec![T::zero(); shape.len()],
        epsilon_hat: vec![T::zero(); shape.samples],
        epsilon_raw: vec![T::zero(); shape.samples],
    });
    let mut class_loss = vec![T::zero(); nc];
    let mut target = vec![T::zero(); v];
    let mut acc = T::zero();

    for i in 0..shape.samples {
        let e = noise.values()[i];
        let mut inner = T::zero();
        for c in 0..nc {
            let g = (i * nc + c) * v;
            let p = &batch.probs()[g..g + v];
            let y = &batch.labels()[g..g + v];
            let h = &batch.noise_head()[g..g + v];
            for k in 0..v {
                target[k] = (y[k] - clipped_correction(e, h[k], gamma)).max(T::zero()).min(one);
            }
            let seg = beta * dice_group(p, &target, smooth) + (one - beta) * bce_group(p, &target, clamp);
            class_loss[c] += seg;
            inner += seg / denominators[c];

            let Some(grads) = grads.as_mut() else { continue };
            let w = one / (denominators[c] * n_samples);
            let (inter, sp, st) = p.iter().zip(&target).fold(
                (T::zero(), T::zero(), T::zero()),
                |(a, b, d), (&p, &t)| (a + p * t, b + p, d + t),
            );
            let den = sp + st + smooth;
            let num = two * inter + smooth;
            let den2 = den * den;
            for k in 0..v {
                let (pk, tk) = (p[k], target[k]);
                let (d_dice_p, d_dice_t) = if den > T::zero() {
                    (-(two * tk * den - num) / den2, -(two * pk * den - num) / den2)
                } else {
                    (T::zero(), T::zero())
                };
                let q = pk.max(clamp).min(hi);
                let d_bce_p = if pk > clamp && pk < hi {
                    (-tk / q + (one - tk) / (one - q)) * inv_v
                } else {
                    T::zero()
                };
                let d_bce_t = ((one - q).ln() - q.ln()) * inv_v;
                grads.probs[g + k] = w * (beta * d_dice_p + (one - beta) * d_bce_p);

                // d target / d (e * h) is -1 where neither clip is active
                let prod = e * h[k];
                let moved = y[k] - prod;
                if prod.abs() < gamma && moved > T::zero() && moved < one {
                    let gt = w * (beta * d_dice_t + (one - beta) * d_bce_t);
                    grads.noise_head[g + k] = -gt * e;
                    grads.epsilon_hat[i] -= gt * h[k];
                }
            }
        }
        acc += inner;
    }

    if let Some(grads) = grads.as_mut() {
        if !noise.is_degenerate() {
            let n = grads.epsilon_hat.len();
            let nf = T::from_usize_lossy(n);
            let e = noise.values();
            let mean_g = grads.epsilon_hat.iter().copied().sum::<T>() / nf;
            let mean_ge = grads
                .epsilon_hat
                .iter()
                .zip(e)
                .map(|(&g, &e)| g * e)
                .sum::<T>()
                / nf;
            for k in 0..n {
                grads.epsilon_raw[k] = (grads.epsilon_hat[k] - mean_g - e[k] * mean_ge) / noise.std();
            }
        }
    }

    for l in class_loss.iter_mut() {
        *l /= n_samples;
    }
    Evaluation {
        total: acc / n_samples,
        class_loss,
        grads,
    }
}

/// Loss and gradients for an already standardised noise estimate.
///
/// Semantic scales enter as constants; no gradient flows into them.
pub fn duo_total_loss<T: Scalar>(
    batch: &PredictionBatch<T>,
    noise: &NoiseEstimate<T>,
    scales: &BTreeMap<ClassId, T>,
    config: &DuoConfig<T>,
) -> Result<LossReport<T>> {
    check_inputs(batch, noise, config)?;
    let denominators = class_denominators(batch, scales, config.alpha)?;
    let eval = evaluate(batch, noise, &denominators, config, true);
    let ids = batch.class_ids();
    Ok(LossReport {
        total: eval.total,
        per_class_weight: ids
            .iter()
            .zip(&denominators)
            .map(|(&c, &d)| (c, T::one() / d))
            .collect(),
        per_class_seg_loss: ids.iter().copied().zip(eval.class_loss).collect(),
        config: *config,
        noise_degenerate: noise.is_degenerate(),
        grads: eval.grads.expect("gradients requested"),
    })
}

/// Standardises `raw_noise` and returns the full report, including the
/// gradient with respect to the raw parameters.
pub fn duo_gradients<T: Scalar>(
    batch: &PredictionBatch<T>,
    raw_noise: &[T],
    scales: &BTreeMap<ClassId, T>,
    config: &DuoConfig<T>,
) -> Result<LossReport<T>> {
    duo_total_loss(batch, &standardize_noise(raw_noise), scales, config)
}

/// Loss value only, from raw noise parameters.
pub fn duo_forward<T: Scalar>(
    batch: &PredictionBatch<T>,
    raw_noise: &[T],
    scales: &BTreeMap<ClassId, T>,
    config: &DuoConfig<T>,
) -> Result<T> {
    let noise = standardize_noise(raw_noise);
    check_inputs(batch, &noise, config)?;
    let denominators = class_denominators(batch, scales, config.alpha)?;
    Ok(evaluate(batch, &noise, &denominators, config, false).total)
}
