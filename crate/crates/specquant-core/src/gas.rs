//! Normalized molar extinction coefficient spectra and their norms.
//!
//! The default nine-gas profile synthesizes Lorentzian line combs from a
//! seeded RNG. Each gas owns a home band so cross-gas overlaps stay small;
//! the CH4/HCl analog pair shares part of its band (plus one broad line each)
//! and carries near-equal norms so that the two-component coupling phenomenon
//! is reproducible. Real coefficient sets can be ingested from files through
//! the companion crate, which lands in [`GasLibrary::from_raw`].

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::grid::{inner_product, norm, Fnv, Spectrum, WavelengthGrid, Weighting};
use crate::linalg::Mat;
use crate::math;
use crate::rng::{stream, uniform, Domain};
use crate::Result;

/// One synthetic gas: a set of Lorentzian lines plus the target norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GasDefinition {
    pub name: String,
    /// Line centers in micrometres.
    pub line_centers: Vec<f64>,
    /// Half width at half maximum per line, micrometres.
    pub line_widths: Vec<f64>,
    /// Relative positive peak strengths.
    pub line_strengths: Vec<f64>,
    /// Recorded extinction norm, 1/(M cm).
    pub target_norm: f64,
}

impl GasDefinition {
    fn validate(&self, grid: &WavelengthGrid) -> Result<()> {
        let n = self.line_centers.len();
        if n == 0 || self.line_widths.len() != n || self.line_strengths.len() != n {
            return Err(Error::invalid(format!(
                "gas {}: line lists must be equal length >= 1",
                self.name
            )));
        }
        if self.target_norm <= 0.0 || !self.target_norm.is_finite() {
            return Err(Error::invalid(format!(
                "gas {}: target norm must be positive",
                self.name
            )));
        }
        for i in 0..n {
            if !(self.line_widths[i] > 0.0) || !(self.line_strengths[i] > 0.0) {
                return Err(Error::invalid(format!(
                    "gas {}: line {i} must have positive width and strength",
                    self.name
                )));
            }
            let c = self.line_centers[i];
            if c < grid.min() || c > grid.max() {
                return Err(Error::invalid(format!(
                    "gas {}: line center {c} um outside grid span [{}, {}]",
                    self.name,
                    grid.min(),
                    grid.max()
                )));
            }
        }
        Ok(())
    }

    /// Evaluate the raw (unnormalized) line sum on the grid.
    fn evaluate(&self, grid: &WavelengthGrid) -> Vec<f64> {
        let mut values = vec![0.0; grid.len()];
        for i in 0..self.line_centers.len() {
            let c = self.line_centers[i];
            let g = self.line_widths[i];
            let s = self.line_strengths[i];
            let g2 = g * g;
            for (v, &lam) in values.iter_mut().zip(grid.points()) {
                let d = lam - c;
                *v += s * g2 / (d * d + g2);
            }
        }
        values
    }

    fn strongest_line(&self) -> usize {
        let mut best = 0;
        for i in 1..self.line_strengths.len() {
            if self.line_strengths[i] > self.line_strengths[best] {
                best = i;
            }
        }
        best
    }
}

/// One library entry: unit-norm shape plus recorded magnitude.
#[derive(Debug, Clone, PartialEq)]
pub struct GasEntry {
    pub name: String,
    /// Unit-norm spectrum (plain weighting).
    pub spectrum: Spectrum,
    /// Extinction norm in 1/(M cm).
    pub norm: f64,
}

/// Ordered set of normalized extinction spectra, descending by norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GasLibrary {
    grid: Arc<WavelengthGrid>,
    gases: Vec<GasEntry>,
}

/// Which gas set to synthesize.
#[derive(Debug, Clone)]
pub enum LibraryProfile {
    /// Nine gases with the published extinction norms.
    DefaultNineGas,
    Custom(Vec<GasDefinition>),
}

/// Placement bias within a home band for the coupled analog pair.
#[derive(Clone, Copy, PartialEq)]
enum BandBias {
    None,
    Left,
    Right,
}

const DEFAULT_GASES: [(&str, f64, usize, BandBias); 9] = [
    ("N2O", 1166.4, 0, BandBias::None),
    ("CO", 569.1, 1, BandBias::None),
    ("H2O", 371.2, 2, BandBias::None),
    ("NO", 219.7, 3, BandBias::None),
    ("CH4", 162.0, 4, BandBias::Left),
    ("HCl", 160.7, 4, BandBias::Right),
    ("HF", 126.9, 5, BandBias::None),
    ("C2H6", 103.1, 6, BandBias::None),
    ("HBr", 30.5, 7, BandBias::None),
];

const BAND_SLOTS: usize = 8;
/// Minimum fraction of a gas's line strength that must sit outside every
/// other gas's strongest line +/- 3 HWHM.
const DISJOINT_STRENGTH_FRACTION: f64 = 0.6;

impl GasLibrary {
    /// Normalize raw spectra and assemble a library.
    ///
    /// Each recorded norm is the raw (plain-weighting) norm of the spectrum
    /// times `norm_scale`; gases are re-sorted descending by recorded norm.
    pub fn from_raw(
        grid: Arc<WavelengthGrid>,
        entries: Vec<(String, Spectrum, f64)>,
    ) -> Result<GasLibrary> {
        if entries.is_empty() {
            return Err(Error::invalid("library needs at least one gas"));
        }
        let mut gases: Vec<GasEntry> = Vec::with_capacity(entries.len());
        for (name, spectrum, norm_scale) in entries {
            if !crate::grid::same_grid(spectrum.grid(), &grid) {
                return Err(Error::GridMismatch);
            }
            if gases.iter().any(|g| g.name == name) {
                return Err(Error::DuplicateName(name));
            }
            if !(norm_scale > 0.0) || !norm_scale.is_finite() {
                return Err(Error::invalid(format!(
                    "gas {name}: norm must be positive and finite"
                )));
            }
            let raw = norm(&spectrum, Weighting::Unit)?;
            if raw == 0.0 {
                return Err(Error::DegenerateGas(name));
            }
            let inv = 1.0 / raw;
            let unit: Vec<f64> = spectrum.values().iter().map(|v| v * inv).collect();
            gases.push(GasEntry {
                name,
                spectrum: Spectrum::new(grid.clone(), unit)?,
                norm: raw * norm_scale,
            });
        }
        gases.sort_by(|a, b| b.norm.partial_cmp(&a.norm).expect("non-finite norm"));
        Ok(GasLibrary { grid, gases })
    }

    /// Assemble a library from spectra that are already unit-norm, keeping
    /// the stored values bit-for-bit (the deserialization path).
    ///
    /// Each spectrum must satisfy `<e|e> = 1` within 1e-10.
    pub fn from_normalized(
        grid: Arc<WavelengthGrid>,
        entries: Vec<(String, Spectrum, f64)>,
    ) -> Result<GasLibrary> {
        if entries.is_empty() {
            return Err(Error::invalid("library needs at least one gas"));
        }
        let mut gases: Vec<GasEntry> = Vec::with_capacity(entries.len());
        for (name, spectrum, gas_norm) in entries {
            if !crate::grid::same_grid(spectrum.grid(), &grid) {
                return Err(Error::GridMismatch);
            }
            if gases.iter().any(|g| g.name == name) {
                return Err(Error::DuplicateName(name));
            }
            if !(gas_norm > 0.0) || !gas_norm.is_finite() {
                return Err(Error::invalid(format!(
                    "gas {name}: norm must be positive and finite"
                )));
            }
            let ip = inner_product(&spectrum, &spectrum, Weighting::Unit)?;
            if math::abs(ip - 1.0) > 1e-10 {
                return Err(Error::invalid(format!(
                    "gas {name}: spectrum is not unit-norm (<e|e> = {ip})"
                )));
            }
            gases.push(GasEntry {
                name,
                spectrum,
                norm: gas_norm,
            });
        }
        gases.sort_by(|a, b| b.norm.partial_cmp(&a.norm).expect("non-finite norm"));
        Ok(GasLibrary { grid, gases })
    }

    pub fn grid(&self) -> &Arc<WavelengthGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.gases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gases.is_empty()
    }

    pub fn gases(&self) -> &[GasEntry] {
        &self.gases
    }

    pub fn names(&self) -> Vec<String> {
        self.gases.iter().map(|g| g.name.clone()).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.gases.iter().map(|g| g.norm).collect()
    }

    pub fn entry(&self, name: &str) -> Option<&GasEntry> {
        self.gases.iter().find(|g| g.name == name)
    }

    /// Unit-norm shapes as a K x M matrix (row per gas).
    pub fn shapes(&self) -> Mat {
        let rows: Vec<Vec<f64>> = self
            .gases
            .iter()
            .map(|g| g.spectrum.values().to_vec())
            .collect();
        Mat::from_rows(&rows)
    }

    /// K x K matrix of `<e_j|e_k>` under plain weighting; symmetric.
    pub fn overlap_matrix(&self) -> Mat {
        let k = self.gases.len();
        let mut m = Mat::zeros(k, k);
        for j in 0..k {
            for l in j..k {
                let v = inner_product(
                    &self.gases[j].spectrum,
                    &self.gases[l].spectrum,
                    Weighting::Unit,
                )
                .expect("library entries share the grid");
                m[(j, l)] = v;
                m[(l, j)] = v;
            }
        }
        m
    }

    /// Content hash covering grid, names, norms and shapes.
    pub fn fingerprint(&self) -> u64 {
        let mut h = Fnv::new();
        h.write_u64(self.grid.fingerprint());
        for g in &self.gases {
            h.write_str(&g.name);
            h.write_f64(g.norm);
            for &v in g.spectrum.values() {
                h.write_f64(v);
            }
        }
        h.finish()
    }
}

/// Synthesize a library from seeded Lorentzian line sets.
///
/// Deterministic for a given `(seed, grid, profile)`: each gas draws from its
/// own sub-stream, so redrawing one gas never shifts the others.
pub fn synthesize_library(
    seed: u64,
    grid: &Arc<WavelengthGrid>,
    profile: &LibraryProfile,
) -> Result<GasLibrary> {
    let defs = match profile {
        LibraryProfile::Custom(defs) => {
            for d in defs {
                d.validate(grid)?;
            }
            defs.clone()
        }
        LibraryProfile::DefaultNineGas => default_profile(seed, grid)?,
    };
    let mut names = Vec::new();
    for d in &defs {
        if names.contains(&d.name) {
            return Err(Error::DuplicateName(d.name.clone()));
        }
        names.push(d.name.clone());
    }
    let entries: Vec<(String, Spectrum, f64)> = defs
        .iter()
        .map(|d| {
            let raw = d.evaluate(grid);
            let raw_norm = math::norm2(&raw);
            if raw_norm == 0.0 {
                return Err(Error::DegenerateGas(d.name.clone()));
            }
            let unit: Vec<f64> = raw.iter().map(|v| v / raw_norm).collect();
            Ok((
                d.name.clone(),
                Spectrum::new(grid.clone(), unit)?,
                d.target_norm,
            ))
        })
        .collect::<Result<_>>()?;
    GasLibrary::from_normalized(grid.clone(), entries)
}

fn default_profile(seed: u64, grid: &Arc<WavelengthGrid>) -> Result<Vec<GasDefinition>> {
    let span = grid.max() - grid.min();
    let margin = 0.02 * span;
    let lo = grid.min() + margin;
    let width = (span - 2.0 * margin) / BAND_SLOTS as f64;

    let mut defs: Vec<GasDefinition> = Vec::with_capacity(9);
    for (idx, &(name, target_norm, slot, bias)) in DEFAULT_GASES.iter().enumerate() {
        let mut rng = stream(seed, Domain::GasLines, idx as u64);
        let band_lo = lo + slot as f64 * width;
        let mut def = draw_gas_lines(&mut rng, name, target_norm, band_lo, width, bias, lo, span - 2.0 * margin);
        // Rejection loop for the disjoint-strength constraint; the per-gas
        // stream keeps redraws independent of every other gas.
        let mut attempts = 0;
        while !satisfies_disjoint_constraint(&defs, &def) {
            attempts += 1;
            if attempts > 64 {
                return Err(Error::invalid(format!(
                    "could not place lines for gas {name} under the overlap constraint"
                )));
            }
            def = draw_gas_lines(&mut rng, name, target_norm, band_lo, width, bias, lo, span - 2.0 * margin);
        }
        defs.push(def);
    }
    Ok(defs)
}

#[allow(clippy::too_many_arguments)]
fn draw_gas_lines(
    rng: &mut ChaCha8Rng,
    name: &str,
    target_norm: f64,
    band_lo: f64,
    band_width: f64,
    bias: BandBias,
    window_lo: f64,
    window_span: f64,
) -> GasDefinition {
    let mut centers = Vec::new();
    let mut widths = Vec::new();
    let mut strengths = Vec::new();

    // narrow comb inside the (possibly biased) home band
    // Inter-band margins keep incidental neighbor overlaps small; the
    // analog pair keeps its intentional shared zone in the band middle.
    let (frac_lo, frac_hi) = match bias {
        BandBias::None => (0.06, 0.94),
        BandBias::Left => (0.06, 0.47),
        BandBias::Right => (0.53, 0.94),
    };
    let n_narrow = 4 + (rng.next_u64() % 27) as usize;
    for _ in 0..n_narrow {
        centers.push(band_lo + uniform(rng, frac_lo, frac_hi) * band_width);
        widths.push(uniform(rng, 0.006, 0.040));
        strengths.push(uniform(rng, 0.15, 1.0));
    }
    // one strong anchor line, kept away from the band edges
    let (a_lo, a_hi) = match bias {
        BandBias::None => (0.20, 0.80),
        BandBias::Left => (0.05, 0.30),
        BandBias::Right => (0.70, 0.95),
    };
    centers.push(band_lo + uniform(rng, a_lo, a_hi) * band_width);
    widths.push(uniform(rng, 0.010, 0.030));
    strengths.push(2.0);
    // Broad coupling line for the analog pair sharing a band. Its strength
    // tracks the comb's accumulated line energy (~ sum s^2 w) so the pair
    // overlap stays near one value for every seed.
    if bias != BandBias::None {
        let comb_energy: f64 = strengths
            .iter()
            .zip(&widths)
            .map(|(s, w)| s * s * w)
            .sum();
        let broad_width = uniform(rng, 0.16, 0.22);
        centers.push(band_lo + (0.5 + uniform(rng, -0.04, 0.04)) * band_width);
        widths.push(broad_width);
        strengths.push(0.45 * math::sqrt(comb_energy / broad_width));
    }
    // weak pan-window floor line: keeps every overlap nonzero
    centers.push(window_lo + uniform(rng, 0.0, 1.0) * window_span);
    widths.push(uniform(rng, 0.30, 0.55));
    strengths.push(0.05);

    GasDefinition {
        name: name.into(),
        line_centers: centers,
        line_widths: widths,
        line_strengths: strengths,
        target_norm,
    }
}

use rand_core::RngCore;

/// At least 60% of each gas's line strength must fall outside every other
/// gas's strongest line +/- 3 HWHM; checked both ways for the candidate.
fn satisfies_disjoint_constraint(existing: &[GasDefinition], candidate: &GasDefinition) -> bool {
    existing.iter().all(|other| {
        strength_outside(candidate, other) >= DISJOINT_STRENGTH_FRACTION
            && strength_outside(other, candidate) >= DISJOINT_STRENGTH_FRACTION
    })
}

fn strength_outside(gas: &GasDefinition, other: &GasDefinition) -> f64 {
    let s = other.strongest_line();
    let c = other.line_centers[s];
    let h = 3.0 * other.line_widths[s];
    let total: f64 = gas.line_strengths.iter().sum();
    let outside: f64 = gas
        .line_centers
        .iter()
        .zip(&gas.line_strengths)
        .filter(|(lc, _)| math::abs(**lc - c) > h)
        .map(|(_, st)| st)
        .sum();
    outside / total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Arc<WavelengthGrid> {
        WavelengthGrid::default_mid_ir()
    }

    #[test]
    fn default_profile_matches_published_norms() {
        let lib = synthesize_library(7, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        assert_eq!(lib.len(), 9);
        assert_eq!(lib.entry("N2O").unwrap().norm, 1166.4);
        assert_eq!(lib.entry("HBr").unwrap().norm, 30.5);
        // descending-norm ordering
        let norms = lib.norms();
        for w in norms.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert_eq!(lib.gases()[0].name, "N2O");
        assert_eq!(lib.gases()[8].name, "HBr");
    }

    #[test]
    fn synthesized_shapes_are_unit_norm() {
        let lib = synthesize_library(7, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        for g in lib.gases() {
            let ip = inner_product(&g.spectrum, &g.spectrum, Weighting::Unit).unwrap();
            assert!((ip - 1.0).abs() < 1e-10, "{}: {ip}", g.name);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = synthesize_library(42, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        let b = synthesize_library(42, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = synthesize_library(43, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn overlaps_small_but_nonzero() {
        let lib = synthesize_library(7, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        let ov = lib.overlap_matrix();
        let k = lib.len();
        let mut max_off = 0.0f64;
        for j in 0..k {
            assert!((ov[(j, j)] - 1.0).abs() < 1e-10);
            for l in 0..k {
                if j != l {
                    let v = math::abs(ov[(j, l)]);
                    assert!(v > 0.0, "zero overlap between {j} and {l}");
                    max_off = max_off.max(v);
                }
            }
        }
        assert!(max_off < 0.3, "max off-diagonal overlap {max_off}");
    }

    #[test]
    fn analog_pair_couples_more_than_other_pairs() {
        let lib = synthesize_library(7, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        let ov = lib.overlap_matrix();
        let names = lib.names();
        let ch4 = names.iter().position(|n| n == "CH4").unwrap();
        let hcl = names.iter().position(|n| n == "HCl").unwrap();
        let pair = math::abs(ov[(ch4, hcl)]);
        let mut others = 0.0f64;
        for j in 0..9 {
            for l in j + 1..9 {
                if !(j == ch4.min(hcl) && l == ch4.max(hcl)) {
                    others = others.max(math::abs(ov[(j, l)]));
                }
            }
        }
        assert!(
            pair > 0.1 && pair > 2.0 * others,
            "pair overlap {pair}, max other {others}"
        );
    }

    #[test]
    fn disjoint_support_gives_zero_overlap() {
        let g = WavelengthGrid::uniform(2.0, 4.0, 10).unwrap();
        let mut a = vec![0.0; 10];
        let mut b = vec![0.0; 10];
        a[1] = 1.0;
        a[2] = 2.0;
        b[7] = 3.0;
        let lib = GasLibrary::from_raw(
            g.clone(),
            vec![
                ("a".into(), Spectrum::new(g.clone(), a).unwrap(), 5.0),
                ("b".into(), Spectrum::new(g.clone(), b).unwrap(), 4.0),
            ],
        )
        .unwrap();
        let ov = lib.overlap_matrix();
        assert_eq!(ov[(0, 1)], 0.0);
        assert_eq!(ov[(1, 0)], 0.0);
    }

    #[test]
    fn single_gas_overlap_is_identity() {
        let g = WavelengthGrid::uniform(2.0, 4.0, 5).unwrap();
        let lib = GasLibrary::from_raw(
            g.clone(),
            vec![(
                "x".into(),
                Spectrum::new(g.clone(), vec![1.0, 2.0, 0.0, 0.0, 0.0]).unwrap(),
                1.0,
            )],
        )
        .unwrap();
        let ov = lib.overlap_matrix();
        assert_eq!(ov.rows(), 1);
        assert!((ov[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scaled_column_records_raw_norm() {
        let g = WavelengthGrid::uniform(2.0, 4.0, 4).unwrap();
        // column equal to 2 * unit vector -> recorded norm 2 (scale 1)
        let vals = vec![0.0, 2.0, 0.0, 0.0];
        let lib = GasLibrary::from_raw(
            g.clone(),
            vec![("x".into(), Spectrum::new(g.clone(), vals).unwrap(), 1.0)],
        )
        .unwrap();
        assert!((lib.gases()[0].norm - 2.0).abs() < 1e-15);
        let n = norm(&lib.gases()[0].spectrum, Weighting::Unit).unwrap();
        assert!((n - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_column_is_degenerate() {
        let g = WavelengthGrid::uniform(2.0, 4.0, 4).unwrap();
        let z = Spectrum::zeros(g.clone());
        let err = GasLibrary::from_raw(g, vec![("z".into(), z, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::DegenerateGas(_)));
    }

    #[test]
    fn duplicate_names_rejected() {
        let g = WavelengthGrid::uniform(2.0, 4.0, 4).unwrap();
        let s1 = Spectrum::new(g.clone(), vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let s2 = Spectrum::new(g.clone(), vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let err = GasLibrary::from_raw(
            g,
            vec![("x".into(), s1, 1.0), ("x".into(), s2, 1.0)],
        )
        .unwrap_err();
        assert!(matches!(err, Error::DuplicateName(_)));
    }

    #[test]
    fn line_outside_grid_is_config_error() {
        let g = WavelengthGrid::uniform(2.0, 4.0, 16).unwrap();
        let def = GasDefinition {
            name: "x".into(),
            line_centers: vec![5.0],
            line_widths: vec![0.1],
            line_strengths: vec![1.0],
            target_norm: 1.0,
        };
        let err = synthesize_library(1, &g, &LibraryProfile::Custom(vec![def])).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn normalization_is_idempotent() {
        let lib = synthesize_library(7, &grid(), &LibraryProfile::DefaultNineGas).unwrap();
        let entries: Vec<(String, Spectrum, f64)> = lib
            .gases()
            .iter()
            .map(|g| (g.name.clone(), g.spectrum.clone(), g.norm))
            .collect();
        let lib2 = GasLibrary::from_raw(lib.grid().clone(), entries).unwrap();
        for (a, b) in lib.gases().iter().zip(lib2.gases()) {
            assert_eq!(a.name, b.name);
            assert!((a.norm - b.norm).abs() <= 1e-12 * a.norm);
            for (x, y) in a.spectrum.values().iter().zip(b.spectrum.values()) {
                assert!((x - y).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn default_profile_respects_strength_constraint() {
        for seed in [1u64, 7, 42] {
            let defs = default_profile(seed, &grid()).unwrap();
            for a in &defs {
                for b in &defs {
                    if a.name != b.name {
                        let f = strength_outside(a, b);
                        assert!(
                            f >= DISJOINT_STRENGTH_FRACTION,
                            "seed {seed}: {} vs {} -> {f}",
                            a.name,
                            b.name
                        );
                    }
                }
            }
        }
    }
}
