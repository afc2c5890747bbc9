//! Central finite-difference verification of the analytic gradients.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ClassId;

use super::{duo_forward, duo_gradients, DuoConfig, Gradients, PredictionBatch};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
pub const DEFAULT_GRAD_TOLERANCE: f64 = 1e-4;

/// Denominator floor for relative errors: components smaller than this are
/// compared in absolute terms.
const REL_FLOOR: f64 = 1e-6;

/// One batch plus everything the objective needs.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckCase {
    pub batch: PredictionBatch<f64>,
    pub raw_noise: Vec<f64>,
    pub scales: BTreeMap<ClassId, f64>,
    pub config: DuoConfig<f64>,
}

/// Random case with `n` samples, `c` classes and a `side^3` volume.
/// Probabilities stay inside `(0.05, 0.95)`, away from the BCE clamp.
pub fn random_case(seed: u64, n: usize, c: usize, side: usize) -> GradCheckCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = [n, c, side, side, side];
    let len = n * c * side * side * side;
    let head = Normal::new(0.0, 0.4).expect("valid normal");
    let probs = (0..len).map(|_| rng.random_range(0.05..0.95)).collect();
    let labels = (0..len)
        .map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
        .collect();
    let noise_head = (0..len).map(|_| head.sample(&mut rng)).collect();
    let raw_noise = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
    let scales = (0..c as ClassId).map(|k| (k, rng.random_range(0.0..1.0))).collect();
    let config = DuoConfig {
        beta: rng.random_range(0.2..0.8),
        ..DuoConfig::default()
    };
    GradCheckCase {
        batch: PredictionBatch::new(dims, probs, labels, noise_head).expect("valid random batch"),
        raw_noise,
        scales,
        config,
    }
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_probs: f64,
    pub max_rel_noise_head: f64,
    pub max_rel_epsilon: f64,
    pub tolerance: f64,
    pub step: f64,
    pub noise_degenerate: bool,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn max_rel(&self) -> f64 {
        self.max_rel_probs.max(self.max_rel_noise_head).max(self.max_rel_epsilon)
    }
}

enum Target {
    Probs,
    NoiseHead,
    Raw,
}

fn central_difference(case: &GradCheckCase, target: Target, index: usize, step: f64) -> Result<f64> {
    let eval = |delta: f64| -> Result<f64> {
        let mut batch = case.batch.clone();
        let mut raw = case.raw_noise.clone();
        match target {
            Target::Probs => batch.probs_mut()[index] += delta,
            Target::NoiseHead => batch.noise_head_mut()[index] += delta,
            Target::Raw => raw[index] += delta,
        }
        duo_forward(&batch, &raw, &case.scales, &case.config)
    };
    Ok((eval(step)? - eval(-step)?) / (2.0 * step))
}

/// Compares `grads` against central differences of the forward loss.
pub fn compare_gradients(
    case: &GradCheckCase,
    grads: &Gradients<f64>,
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut max_rel_probs: f64 = 0.0;
    let mut max_rel_noise_head: f64 = 0.0;
    let mut max_rel_epsilon: f64 = 0.0;
    for (k, &a) in grads.probs.iter().enumerate() {
        let n = central_difference(case, Target::Probs, k, step)?;
        max_rel_probs = max_rel_probs.max(relative_error(a, n));
    }
    for (k, &a) in grads.noise_head.iter().enumerate() {
        let n = central_difference(case, Target::NoiseHead, k, step)?;
        max_rel_noise_head = max_rel_noise_head.max(relative_error(a, n));
    }
    for (k, &a) in grads.epsilon_raw.iter().enumerate() {
        let n = central_difference(case, Target::Raw, k, step)?;
        max_rel_epsilon = max_rel_epsilon.max(relative_error(a, n));
    }
    let worst = max_rel_probs.max(max_rel_noise_head).max(max_rel_epsilon);
    Ok(GradCheckReport {
        max_rel_probs,
        max_rel_noise_head,
        max_rel_epsilon,
        tolerance,
        step,
        noise_degenerate: false,
        passed: worst < tolerance,
    })
}

/// Analytic gradients of the case checked against central differences.
pub fn check_gradients(case: &GradCheckCase, step: f64, tolerance: f64) -> Result<GradCheckReport> {
    let report = duo_gradients(&case.batch, &case.raw_noise, &case.scales, &case.config)?;
    let mut check = compare_gradients(case, &report.grads, step, tolerance)?;
    check.noise_degenerate = report.noise_degenerate;
    Ok(check)
}
