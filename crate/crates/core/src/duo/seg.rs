use crate::error::{Error, Result};
use crate::Scalar;

use super::BatchShape;

/// Soft Dice loss of one `(sample, class)` group. Returns 0 when both the
/// prediction and target are empty and `smooth == 0`.
pub(crate) fn dice_group<T: Scalar>(p: &[T], t: &[T], smooth: T) -> T {
    let (inter, sp, st) = p
        .iter()
        .zip(t)
        .fold((T::zero(), T::zero(), T::zero()), |(i, a, b), (&p, &t)| {
            (i + p * t, a + p, b + t)
        });
    let den = sp + st + smooth;
    if den == T::zero() {
        return T::zero();
    }
    T::one() - (inter + inter + smooth) / den
}

/// Mean binary cross-entropy of one group, probabilities clipped to
/// `[clamp, 1 - clamp]`. Targets may be soft.
pub(crate) fn bce_group<T: Scalar>(p: &[T], t: &[T], clamp: T) -> T {
    let hi = T::one() - clamp;
    let sum = p.iter().zip(t).fold(T::zero(), |acc, (&p, &t)| {
        let q = p.max(clamp).min(hi);
        acc - (t * q.ln() + (T::one() - t) * (T::one() - q).ln())
    });
    sum / T::from_usize_lossy(p.len())
}

fn check_pair<T>(probs: &[T], targets: &[T], shape: BatchShape) -> Result<()> {
    shape.check("probs", probs.len())?;
    shape.check("targets", targets.len())
}

fn check_beta<T: Scalar>(beta: T) -> Result<()> {
    if beta >= T::zero() && beta <= T::one() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("beta must lie in [0, 1], got {beta}")))
    }
}

/// Dice loss summed over voxels and averaged over the `N * C` groups.
pub fn dice_loss<T: Scalar>(probs: &[T], targets: &[T], shape: BatchShape, smooth: T) -> Result<T> {
    check_pair(probs, targets, shape)?;
    if !(smooth >= T::zero()) {
        return Err(Error::Parameter(format!("smooth must be >= 0, got {smooth}")));
    }
    let v = shape.voxels;
    let sum: T = probs
        .chunks_exact(v)
        .zip(targets.chunks_exact(v))
        .map(|(p, t)| dice_group(p, t, smooth))
        .sum();
    Ok(sum / T::from_usize_lossy(shape.groups()))
}

/// BCE averaged over every element of the batch.
pub fn bce_loss<T: Scalar>(probs: &[T], targets: &[T], shape: BatchShape, clamp: T) -> Result<T> {
    check_pair(probs, targets, shape)?;
    if !(clamp > T::zero() && clamp < T::lit(0.5)) {
        return Err(Error::Parameter(format!("clamp must lie in (0, 0.5), got {clamp}")));
    }
    let v = shape.voxels;
    let sum: T = probs
        .chunks_exact(v)
        .zip(targets.chunks_exact(v))
        .map(|(p, t)| bce_group(p, t, clamp))
        .sum();
    Ok(sum / T::from_usize_lossy(shape.groups()))
}

/// `beta * dice + (1 - beta) * bce` over the whole batch.
pub fn seg_loss<T: Scalar>(
    probs: &[T],
    targets: &[T],
    shape: BatchShape,
    beta: T,
    smooth: T,
    clamp: T,
) -> Result<T> {
    check_beta(beta)?;
    let dice = dice_loss(probs, targets, shape, smooth)?;
    let bce = bce_loss(probs, targets, shape, clamp)?;
    Ok(beta * dice + (T::one() - beta) * bce)
}

/// Unweighted objective: per-group segmentation losses summed over classes
/// and averaged over samples. Uses the same summation order as
/// [`super::duo_total_loss`], so the two agree bit-for-bit when every class
/// weight is 1 and the labels are unchanged.
pub fn seg_loss_baseline<T: Scalar>(
    probs: &[T],
    targets: &[T],
    shape: BatchShape,
    beta: T,
    smooth: T,
    clamp: T,
) -> Result<T> {
    check_pair(probs, targets, shape)?;
    check_beta(beta)?;
    let v = shape.voxels;
    let mut acc = T::zero();
    for i in 0..shape.samples {
        let mut inner = T::zero();
        for c in 0..shape.classes {
            let g = (i * shape.classes + c) * v;
            let (p, t) = (&probs[g..g + v], &targets[g..g + v]);
            inner += beta * dice_group(p, t, smooth) + (T::one() - beta) * bce_group(p, t, clamp);
        }
        acc += inner;
    }
    Ok(acc / T::from_usize_lossy(shape.samples))
}
