//! Wavelength grids, spectra, inner products and norms.
//!
//! Spectra are stored densely on a shared grid. The functional inner product
//! is realized as trapezoidal quadrature on that grid; the plain flavor is an
//! unweighted dot product, matching the convention `<g|f> = sum g(l_j) f(l_j)`.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math;
use crate::Result;

/// Inner-product weighting mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weighting {
    /// Plain dot product, `w_j = 1`.
    Unit,
    /// Trapezoidal quadrature weights for the functional flavor.
    Trapezoidal,
}

/// Strictly increasing wavelength sampling grid in micrometres.
#[derive(Debug, Clone, PartialEq)]
pub struct WavelengthGrid {
    points: Vec<f64>,
    trapezoid: Vec<f64>,
}

impl WavelengthGrid {
    /// Build a grid from explicit points. Points must be finite, positive and
    /// strictly increasing, with at least two of them.
    pub fn new(points: Vec<f64>) -> Result<Arc<Self>> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "wavelength grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (j, &p) in points.iter().enumerate() {
            if !p.is_finite() || p <= 0.0 {
                return Err(Error::invalid(format!(
                    "wavelength grid point {j} must be finite and positive, got {p}"
                )));
            }
            if j > 0 && p <= points[j - 1] {
                return Err(Error::invalid(format!(
                    "wavelength grid must be strictly increasing at index {j}"
                )));
            }
        }
        let n = points.len();
        let mut trapezoid = Vec::with_capacity(n);
        trapezoid.push(0.5 * (points[1] - points[0]));
        for j in 1..n - 1 {
            trapezoid.push(0.5 * (points[j + 1] - points[j - 1]));
        }
        trapezoid.push(0.5 * (points[n - 1] - points[n - 2]));
        Ok(Arc::new(WavelengthGrid { points, trapezoid }))
    }

    /// Uniform grid of `n` points spanning `[lo, hi]` micrometres.
    pub fn uniform(lo: f64, hi: f64, n: usize) -> Result<Arc<Self>> {
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi <= lo || n < 2 {
            return Err(Error::invalid(format!(
                "invalid uniform grid spec: lo={lo}, hi={hi}, n={n}"
            )));
        }
        let step = (hi - lo) / (n - 1) as f64;
        let points = (0..n).map(|j| lo + j as f64 * step).collect();
        Self::new(points)
    }

    /// Default mid-infrared window: 1000 uniform points over 2.5-14 um.
    pub fn default_mid_ir() -> Arc<Self> {
        Self::uniform(2.5, 14.0, 1000).expect("default grid spec is valid")
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Quadrature weights for a weighting mode; `None` means all ones.
    pub fn weights(&self, weighting: Weighting) -> Option<&[f64]> {
        match weighting {
            Weighting::Unit => None,
            Weighting::Trapezoidal => Some(&self.trapezoid),
        }
    }

    /// Content hash of the grid points.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        for &p in &self.points {
            h.write_f64(p);
        }
        h.finish()
    }
}

/// Value equality or pointer identity.
pub fn same_grid(a: &Arc<WavelengthGrid>, b: &Arc<WavelengthGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.points == b.points
}

/// A real-valued spectrum sampled on a shared grid. Absorbance values are
/// unitless; extinction values carry 1/(M cm).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Arc<WavelengthGrid>,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(grid: Arc<WavelengthGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "spectrum values".into(),
                expected: grid.len(),
                got: values.len(),
            });
        }
        if !math::all_finite(&values) {
            return Err(Error::NonFinite("spectrum values".into()));
        }
        Ok(Spectrum { grid, values })
    }

    pub fn zeros(grid: Arc<WavelengthGrid>) -> Self {
        let n = grid.len();
        Spectrum {
            grid,
            values: alloc::vec![0.0; n],
        }
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// `sum_j w_j f(l_j) g(l_j)`; symmetric in `f` and `g`.
pub fn inner_product(f: &Spectrum, g: &Spectrum, weighting: Weighting) -> Result<f64> {
    if !same_grid(&f.grid, &g.grid) {
        return Err(Error::GridMismatch);
    }
    Ok(inner_product_slices(
        &f.values,
        &g.values,
        f.grid.weights(weighting),
    ))
}

/// Slice-level inner product used by hot paths that already validated grids.
#[inline]
pub fn inner_product_slices(f: &[f64], g: &[f64], weights: Option<&[f64]>) -> f64 {
    match weights {
        None => math::dot(f, g),
        Some(w) => math::weighted_dot(f, g, w),
    }
}

/// `sqrt(<f|f>)` under the given weighting; zero only for the zero spectrum.
pub fn norm(f: &Spectrum, weighting: Weighting) -> Result<f64> {
    Ok(math::sqrt(inner_product(f, f, weighting)?))
}

/// FNV-1a hasher for content fingerprints; stable across platforms.
pub struct Fnv {
    state: u64,
}

impl Fnv {
    pub fn new() -> Self {
        Fnv {
            state: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn write_bytes(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.state ^= b as u64;
            self.state = self.state.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub fn write_u64(&mut self, v: u64) {
        self.write_bytes(&v.to_le_bytes());
    }

    pub fn write_str(&mut self, s: &str) {
        self.write_bytes(s.as_bytes());
        self.write_bytes(&[0xff]);
    }

    pub fn finish(&self) -> u64 {
        self.state
    }
}

impl Default for Fnv {
    fn default() -> Self {
        Self::new()
    }
}
