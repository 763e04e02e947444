//! Beer-Lambert dataset synthesis with relative-intensity noise.
//!
//! The noiseless absorbance of a mixture is the linear superposition
//! `A0(l) = sum_k b c_k |e_k| e_k(l)`. Source noise enters multiplicatively
//! on the transmitted intensity, `I/I0 = 10^(-A0) (1 + rho)` with
//! `rho ~ N(0, sigma)` i.i.d. per grid point, so the recorded absorbance is
//! `A = A0 - log10(1 + rho)`. Draws with `1 + rho <= 0` are rejected and
//! redrawn, which keeps the logarithm defined without clamping bias.
//!
//! Every sample owns an RNG stream derived from `(seed, sample index)`;
//! generation order and parallel chunking never change the output.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::gas::GasLibrary;
use crate::grid::{Fnv, Spectrum, WavelengthGrid};
use crate::linalg::{for_each_row_indexed, Mat};
use crate::math::{self, LN_10};
use crate::rng::{stream, uniform01, Domain, NormalSampler};
use crate::Result;

/// Relative-intensity-noise level. `sigma = 10^(-snr_db / 10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    snr_db: f64,
    sigma: f64,
}

impl NoiseSpec {
    pub fn from_snr_db(snr_db: f64) -> Result<Self> {
        if !snr_db.is_finite() || snr_db <= 0.0 {
            return Err(Error::invalid(format!(
                "SNR must be positive and finite, got {snr_db} dB"
            )));
        }
        let sigma = math::powf(10.0, -snr_db / 10.0);
        Ok(NoiseSpec { snr_db, sigma })
    }

    pub fn snr_db(&self) -> f64 {
        self.snr_db
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Concentration sampling law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConcentrationMode {
    Uniform,
    LogUniform,
}

/// How per-sample constituent concentrations are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationScheme {
    pub mode: ConcentrationMode,
    /// Lower bound, molar.
    pub low: f64,
    /// Upper bound, molar.
    pub high: f64,
    /// Probability that a constituent is present in a sample.
    pub presence_prob: f64,
}

impl ConcentrationScheme {
    pub fn new(mode: ConcentrationMode, low: f64, high: f64, presence_prob: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite()) || low <= 0.0 || high <= low {
            return Err(Error::invalid(format!(
                "concentration bounds must satisfy 0 < low < high, got [{low}, {high}]"
            )));
        }
        if !(presence_prob > 0.0 && presence_prob <= 1.0) {
            return Err(Error::invalid(format!(
                "presence probability must be in (0, 1], got {presence_prob}"
            )));
        }
        Ok(ConcentrationScheme {
            mode,
            low,
            high,
            presence_prob,
        })
    }
}

/// The three dataset families used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupPreset {
    /// Uniform 0..10 uM, every gas present.
    I,
    /// Log-uniform 100 pM..10 uM, each gas present in half the samples.
    II,
    /// Log-uniform 10 pM..1 mM, each gas present in half the samples.
    III,
}

impl GroupPreset {
    pub fn scheme(self) -> ConcentrationScheme {
        match self {
            GroupPreset::I => ConcentrationScheme {
                mode: ConcentrationMode::Uniform,
                low: f64::EPSILON,
                high: 10e-6,
                presence_prob: 1.0,
            },
            GroupPreset::II => ConcentrationScheme {
                mode: ConcentrationMode::LogUniform,
                low: 100e-12,
                high: 10e-6,
                presence_prob: 0.5,
            },
            GroupPreset::III => ConcentrationScheme {
                mode: ConcentrationMode::LogUniform,
                low: 10e-12,
                high: 1e-3,
                presence_prob: 0.5,
            },
        }
    }
}

/// Draw an `n x k` concentration matrix.
///
/// Entry `(i, k)` is a pure function of `(seed, i, k)`: each row owns a
/// stream and consumes exactly two uniforms per entry.
pub fn sample_concentrations(
    scheme: &ConcentrationScheme,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<Mat> {
    if n == 0 || k == 0 {
        return Err(Error::invalid("need at least one sample and one gas"));
    }
    ConcentrationScheme::new(scheme.mode, scheme.low, scheme.high, scheme.presence_prob)?;
    let mut out = Mat::zeros(n, k);
    let lg_lo = math::log10(scheme.low);
    let lg_hi = math::log10(scheme.high);
    let scheme = *scheme;
    for_each_row_indexed(&mut out, |i, row| {
        let mut rng = stream(seed, Domain::Concentration, i as u64);
        for slot in row.iter_mut() {
            let present = uniform01(&mut rng) < scheme.presence_prob;
            let u = uniform01(&mut rng);
            let value = match scheme.mode {
                ConcentrationMode::Uniform => scheme.low + u * (scheme.high - scheme.low),
                ConcentrationMode::LogUniform => {
                    math::powf(10.0, lg_lo + u * (lg_hi - lg_lo))
                }
            };
            *slot = if present { value } else { 0.0 };
        }
    });
    Ok(out)
}

/// Noiseless absorbance row for one concentration vector.
fn forward_noiseless_into(shapes: &Mat, scale: &[f64], out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = 0.0;
    }
    for (k, &f) in scale.iter().enumerate() {
        if f != 0.0 {
            math::axpy(f, shapes.row(k), out);
        }
    }
}

/// Add `-log10(1 + rho)` noise in place, rejecting draws with `1 + rho <= 0`.
fn add_rin_noise(out: &mut [f64], sigma: f64, rng: &mut ChaCha8Rng) {
    let mut ns = NormalSampler::new();
    for v in out.iter_mut() {
        let rho = loop {
            let z = sigma * ns.sample(rng);
            if 1.0 + z > 0.0 {
                break z;
            }
        };
        *v -= math::ln_1p(rho) / LN_10;
    }
}

/// Beer-Lambert forward model for one sample.
pub fn forward_spectrum(
    lib: &GasLibrary,
    concentrations: &[f64],
    path_length_cm: f64,
    noise: Option<&NoiseSpec>,
    noise_seed: u64,
) -> Result<Spectrum> {
    if concentrations.len() != lib.len() {
        return Err(Error::DimensionMismatch {
            what: "concentration vector".into(),
            expected: lib.len(),
            got: concentrations.len(),
        });
    }
    if concentrations.iter().any(|&c| !(c >= 0.0) || !c.is_finite()) {
        return Err(Error::invalid("concentrations must be finite and non-negative"));
    }
    if !(path_length_cm > 0.0) || !path_length_cm.is_finite() {
        return Err(Error::invalid("path length must be positive"));
    }
    let shapes = lib.shapes();
    let scale: Vec<f64> = lib
        .gases()
        .iter()
        .zip(concentrations)
        .map(|(g, &c)| path_length_cm * c * g.norm)
        .collect();
    let mut values = alloc::vec![0.0; lib.grid().len()];
    forward_noiseless_into(&shapes, &scale, &mut values);
    if let Some(ns) = noise {
        let mut rng = stream(noise_seed, Domain::Noise, 0);
        add_rin_noise(&mut values, ns.sigma, &mut rng);
    }
    Spectrum::new(lib.grid().clone(), values)
}

/// A generated dataset: absorbance rows paired with true concentrations.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectraDataset {
    pub grid: Arc<WavelengthGrid>,
    pub gas_names: Vec<String>,
    /// `n x m_lambda`, unitless absorbance.
    pub absorbances: Mat,
    /// `n x k`, molar.
    pub concentrations: Mat,
    pub path_length_cm: f64,
    pub noise: Option<NoiseSpec>,
    pub scheme: ConcentrationScheme,
    pub seed: u64,
    pub library_fingerprint: u64,
}

impl SpectraDataset {
    pub fn n_samples(&self) -> usize {
        self.absorbances.rows()
    }

    pub fn n_wavelengths(&self) -> usize {
        self.absorbances.cols()
    }

    pub fn n_gases(&self) -> usize {
        self.concentrations.cols()
    }

    /// Copy a subset of rows (e.g. one cross-validation split).
    pub fn select_rows(&self, idx: &[usize]) -> SpectraDataset {
        let mut abs = Mat::zeros(idx.len(), self.n_wavelengths());
        let mut con = Mat::zeros(idx.len(), self.n_gases());
        for (r, &i) in idx.iter().enumerate() {
            abs.row_mut(r).copy_from_slice(self.absorbances.row(i));
            con.row_mut(r).copy_from_slice(self.concentrations.row(i));
        }
        SpectraDataset {
            grid: self.grid.clone(),
            gas_names: self.gas_names.clone(),
            absorbances: abs,
            concentrations: con,
            path_length_cm: self.path_length_cm,
            noise: self.noise,
            scheme: self.scheme,
            seed: self.seed,
            library_fingerprint: self.library_fingerprint,
        }
    }

    /// Content hash over matrices and metadata.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.grid.fingerprint());
        h.write_u64(self.library_fingerprint);
        h.write_u64(self.seed);
        h.write_f64(self.path_length_cm);
        for name in &self.gas_names {
            h.write_str(name);
        }
        for &v in self.absorbances.data() {
            h.write_f64(v);
        }
        for &v in self.concentrations.data() {
            h.write_f64(v);
        }
        h.finish()
    }
}

/// Generate `n` i.i.d. samples; rows are independent of generation order.
pub fn generate_dataset(
    lib: &GasLibrary,
    scheme: &ConcentrationScheme,
    n: usize,
    path_length_cm: f64,
    noise: Option<NoiseSpec>,
    seed: u64,
) -> Result<SpectraDataset> {
    if !(path_length_cm > 0.0) || !path_length_cm.is_finite() {
        return Err(Error::invalid("path length must be positive"));
    }
    let k = lib.len();
    let concentrations = sample_concentrations(scheme, n, k, seed)?;
    let shapes = lib.shapes();
    let norms = lib.norms();
    let m = lib.grid().len();
    let mut absorbances = Mat::zeros(n, m);
    let conc_ref = &concentrations;
    let sigma = noise.map(|ns| ns.sigma);
    for_each_row_indexed(&mut absorbances, |i, row| {
        let c = conc_ref.row(i);
        let scale: Vec<f64> = (0..k).map(|g| path_length_cm * c[g] * norms[g]).collect();
        forward_noiseless_into(&shapes, &scale, row);
        if let Some(s) = sigma {
            let mut rng = stream(seed, Domain::Noise, i as u64);
            add_rin_noise(row, s, &mut rng);
        }
    });
    Ok(SpectraDataset {
        grid: lib.grid().clone(),
        gas_names: lib.names(),
        absorbances,
        concentrations,
        path_length_cm,
        noise,
        scheme: *scheme,
        seed,
        library_fingerprint: lib.fingerprint(),
    })
}
