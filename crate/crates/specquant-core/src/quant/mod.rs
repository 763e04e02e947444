//! Quantification models: score-space linear regression, its sparsified
//! direct form, the nearly training-free model, and a NIPALS PLSR baseline.

mod lr;
mod plsr;
mod tf;

pub use lr::{
    estimate_overlap_noise, fit_lr, sparsify_to_direct, DirectModel, LrModel, OverlapNoiseEstimate,
    RetainSpec,
};
pub use plsr::{fit_plsr, PlsrModel};
pub use tf::{estimate_system_noise, fit_tf, BMode, NoiseMode, SystemNoiseEstimate, TfModel};
