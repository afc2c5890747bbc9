//! Aleatoric uncertainty scoring for segmentation datasets.
//!
//! Feature volumes produced by a frozen encoder are reshaped per class,
//! reduced to their singular spectrum, and summarised as a normalised
//! spectral entropy (the *semantic scale*). Per-sample scales are mapped to
//! an Aleatoric Uncertainty Value (AUV) in `[0, 1]`, which drives quantile
//! based dataset filtering. The [`duo`] module provides an uncertainty
//! weighted Dice + BCE objective with label denoising and exact gradients.
//!
//! All numeric kernels are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the 64-bit instantiation used by the pipeline.

pub mod dataset;
pub mod duo;
pub mod error;
pub mod filtering;
pub mod npy;
pub mod records;
pub mod scalar;
pub mod spectrum;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Integer class label attached to a channel of a feature volume.
pub type ClassId = u32;

pub type FeatureVolumeF64 = tensor::FeatureVolume<f64>;
pub type FeatureVolumeF32 = tensor::FeatureVolume<f32>;
pub type ClassFeatureMatrixF64 = tensor::ClassFeatureMatrix<f64>;
pub type ClassFeatureMatrixF32 = tensor::ClassFeatureMatrix<f32>;
pub type SingularSpectrumF64 = spectrum::SingularSpectrum<f64>;
pub type SingularSpectrumF32 = spectrum::SingularSpectrum<f32>;
pub type EnergySpectrumF64 = spectrum::EnergySpectrum<f64>;
pub type EnergySpectrumF32 = spectrum::EnergySpectrum<f32>;
pub type PredictionBatchF64 = duo::PredictionBatch<f64>;
pub type NoiseEstimateF64 = duo::NoiseEstimate<f64>;
pub type LossReportF64 = duo::LossReport<f64>;
pub type DuoConfigF64 = duo::DuoConfig<f64>;

/// Tool version embedded in every file this crate writes.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
