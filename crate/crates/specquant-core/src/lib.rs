//! Core algorithms for multi-constituent absorption-spectroscopy quantification.
//!
//! The crate synthesizes mixture datasets from a Beer-Lambert forward model
//! with relative-intensity noise, decomposes spectra with (quadrature-weighted)
//! principal component analysis, and quantifies constituent concentrations with
//! a score-space linear regression, a sparsified direct model, a nearly
//! training-free model built from the extinction coefficients themselves, and
//! a NIPALS partial-least-squares baseline. An evaluation harness reproduces
//! k-fold, component-count, training-size and out-of-range protocols.
//!
//! Everything in here is pure computation on in-memory arrays: the crate is
//! `no_std`-compatible (`alloc` required, enable the `libm` feature in place
//! of `std`). File formats and the command-line front end live in the
//! companion `specquant` crate.
//!
//! All algorithms are bit-deterministic for fixed inputs and seeds, regardless
//! of the rayon thread count: parallel work is always partitioned over
//! independent output rows or disjoint column pairs, never over floating-point
//! reductions.

#![cfg_attr(not(feature = "std"), no_std)]

#[cfg(not(any(feature = "std", feature = "libm")))]
compile_error!("specquant-core requires either the `std` or the `libm` feature");

extern crate alloc;

pub mod error;
pub mod eval;
pub mod gas;
pub mod grid;
pub mod linalg;
pub mod math;
pub mod pca;
pub mod quant;
pub mod rng;
pub mod synth;

pub use error::Error;
pub use gas::{GasDefinition, GasLibrary};
pub use grid::{Spectrum, WavelengthGrid, Weighting};
pub use linalg::Mat;
pub use pca::{Flavor, PcBasis, ScoreMatrix};
pub use synth::{ConcentrationScheme, GroupPreset, NoiseSpec, SpectraDataset};

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
