//! Nearly training-free quantification.
//!
//! The component basis is extracted from the K extinction-coefficient shapes
//! themselves instead of a training dataset, so the basis spans the signal
//! space exactly. For a test spectrum, `A~_p = <phi_p|A>` obeys
//! `A~ = b B' eps C + N'` with `B'[p][k] = <phi_p|e_k>`; prediction inverts
//! that square system. Only the path length `b` and the noise projections
//! `N'` may need calibration — `K + 1` parameters in total.
//!
//! Uncentered fitting is the default (the mean of K shapes is statistically
//! meaningless); centered mode appends the normalized mean as an extra
//! projection function so that the system stays square and exact.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::gas::GasLibrary;
use crate::grid::inner_product_slices;
use crate::linalg::{condition_number, for_each_row_indexed, lstsq, Lu, Mat};
use crate::math;
use crate::pca::{fit_pca, project, Flavor, PcBasis};
use crate::synth::SpectraDataset;
use crate::Result;

/// Path-length handling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BMode {
    Known(f64),
    Learn,
}

/// Noise-projection handling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    Zero,
    Learn,
}

/// Trained (or directly constructed) training-free model.
#[derive(Debug, Clone, PartialEq)]
pub struct TfModel {
    basis: PcBasis,
    /// True when the normalized mean is appended as the last projection
    /// function (centered mode).
    mean_appended: bool,
    gas_names: Vec<String>,
    eps_norms: Vec<f64>,
    /// `K x K`, `[p][k] = <g_p | e_k>` for projection functions `g_p`.
    beta_prime_t: Mat,
    /// Shape scores in the basis (for exact shape reconstruction).
    shape_scores: Mat,
    b: f64,
    n_prime: Vec<f64>,
    /// Condition number of the projected shape matrix.
    condition: f64,
}

impl TfModel {
    pub fn basis(&self) -> &PcBasis {
        &self.basis
    }

    pub fn mean_appended(&self) -> bool {
        self.mean_appended
    }

    pub fn gas_names(&self) -> &[String] {
        &self.gas_names
    }

    pub fn eps_norms(&self) -> &[f64] {
        &self.eps_norms
    }

    pub fn beta_prime_t(&self) -> &Mat {
        &self.beta_prime_t
    }

    pub fn shape_scores(&self) -> &Mat {
        &self.shape_scores
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n_prime(&self) -> &[f64] {
        &self.n_prime
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        basis: PcBasis,
        mean_appended: bool,
        gas_names: Vec<String>,
        eps_norms: Vec<f64>,
        beta_prime_t: Mat,
        shape_scores: Mat,
        b: f64,
        n_prime: Vec<f64>,
        condition: f64,
    ) -> Result<Self> {
        let k = gas_names.len();
        if beta_prime_t.rows() != k || beta_prime_t.cols() != k || eps_norms.len() != k {
            return Err(Error::DimensionMismatch {
                what: "training-free model".into(),
                expected: k,
                got: beta_prime_t.rows(),
            });
        }
        Ok(TfModel {
            basis,
            mean_appended,
            gas_names,
            eps_norms,
            beta_prime_t,
            shape_scores,
            b,
            n_prime,
            condition,
        })
    }

    /// Projection functions: basis components, plus the normalized mean in
    /// centered mode. `K x M`.
    pub fn projection_functions(&self) -> Mat {
        let m = self.basis.grid().len();
        let k = self.gas_names.len();
        let mut out = Mat::zeros(k, m);
        for l in 0..self.basis.len() {
            out.row_mut(l).copy_from_slice(self.basis.component(l));
        }
        if self.mean_appended {
            let w = self.basis.grid().weights(self.basis.flavor().weighting());
            let u = self.basis.mean();
            let nrm = math::sqrt(inner_product_slices(u, u, w));
            let dst = out.row_mut(k - 1);
            for (d, &s) in dst.iter_mut().zip(u.iter()) {
                *d = s / nrm;
            }
        }
        out
    }

    /// `b * B'^T * eps`, the square system matrix of the model.
    fn system_matrix(&self) -> Mat {
        let k = self.gas_names.len();
        let mut m0 = Mat::zeros(k, k);
        for p in 0..k {
            for g in 0..k {
                m0[(p, g)] = self.b * self.beta_prime_t[(p, g)] * self.eps_norms[g];
            }
        }
        m0
    }

    /// Raw projections `<g_p | A_i>` for each sample row.
    fn project_raw(&self, spectra: &Mat) -> Result<Mat> {
        if spectra.cols() != self.basis.grid().len() {
            return Err(Error::GridMismatch);
        }
        let proj = self.projection_functions();
        let w = self.basis.grid().weights(self.basis.flavor().weighting());
        let k = proj.rows();
        let mut weighted = proj.clone();
        if let Some(w) = w {
            for p in 0..k {
                let row = weighted.row_mut(p);
                for j in 0..row.len() {
                    row[j] *= w[j];
                }
            }
        }
        let mut out = Mat::zeros(spectra.rows(), k);
        {
            let wref = &weighted;
            for_each_row_indexed(&mut out, |i, row| {
                let a = spectra.row(i);
                for (p, slot) in row.iter_mut().enumerate() {
                    *slot = math::dot(wref.row(p), a);
                }
            });
        }
        Ok(out)
    }

    /// Predict concentrations: `C = (b B'^T eps)^{-1} (A~ - N')`.
    pub fn predict(&self, spectra: &Mat) -> Result<Mat> {
        let a_tilde = self.project_raw(spectra)?;
        let lu = Lu::factor(&self.system_matrix(), "training-free system")?;
        let k = self.gas_names.len();
        let mut out = Mat::zeros(spectra.rows(), k);
        for i in 0..out.rows() {
            let mut rhs: Vec<f64> = a_tilde.row(i).to_vec();
            for (r, &np) in rhs.iter_mut().zip(&self.n_prime) {
                *r -= np;
            }
            let c = lu.solve_vec(&rhs);
            out.row_mut(i).copy_from_slice(&c);
        }
        Ok(out)
    }

    /// Derived affine-map weight matrix `(b B'^T eps)^{-1}` (diagnostic).
    pub fn lambda(&self) -> Result<Mat> {
        let lu = Lu::factor(&self.system_matrix(), "training-free system")?;
        let k = self.gas_names.len();
        let mut inv = Mat::zeros(k, k);
        for j in 0..k {
            let mut e = alloc::vec![0.0; k];
            e[j] = 1.0;
            let col = lu.solve_vec(&e);
            for i in 0..k {
                inv[(i, j)] = col[i];
            }
        }
        Ok(inv)
    }

    /// Derived bias of the affine map, `-(b B'^T eps)^{-1} N'`.
    pub fn bias(&self) -> Result<Vec<f64>> {
        let lam = self.lambda()?;
        Ok((0..self.gas_names.len())
            .map(|i| -math::dot(lam.row(i), &self.n_prime))
            .collect())
    }

    /// Exact unit shapes reconstructed from the basis and shape scores.
    pub fn reconstructed_shapes(&self) -> Mat {
        let k = self.gas_names.len();
        let m = self.basis.grid().len();
        let mut shapes = Mat::zeros(k, m);
        for g in 0..k {
            let row = shapes.row_mut(g);
            row.copy_from_slice(self.basis.mean());
            for l in 0..self.basis.len() {
                math::axpy(self.shape_scores[(g, l)], self.basis.component(l), row);
            }
        }
        shapes
    }
}

/// Fit the training-free model from a gas library, optionally learning the
/// path length and/or noise projections from a small calibration set.
pub fn fit_tf(
    lib: &GasLibrary,
    flavor: Flavor,
    centered: bool,
    b_mode: BMode,
    noise_mode: NoiseMode,
    calibration: Option<&SpectraDataset>,
) -> Result<TfModel> {
    let k = lib.len();
    let shapes = lib.shapes();
    if k < 1 {
        return Err(Error::invalid("library is empty"));
    }
    if k > lib.grid().len() {
        return Err(Error::DegenerateLibrary(format!(
            "{k} gases on a {}-point grid",
            lib.grid().len()
        )));
    }
    if k == 1 && centered {
        return Err(Error::DegenerateLibrary(
            "centered fitting needs at least two shapes".into(),
        ));
    }
    let max_components = if centered { k - 1 } else { k };
    let basis = fit_pca(&shapes, lib.grid(), flavor, centered, max_components)?;
    let expected = if centered { k - 1 } else { k };
    if basis.len() != expected {
        return Err(Error::DegenerateLibrary(format!(
            "extinction set has rank {} < {expected}",
            basis.len()
        )));
    }
    let shape_scores = project(&basis, &shapes)?.scores;

    let mut model = TfModel {
        basis,
        mean_appended: centered,
        gas_names: lib.names(),
        eps_norms: lib.norms(),
        beta_prime_t: Mat::zeros(k, k),
        shape_scores,
        b: 1.0,
        n_prime: alloc::vec![0.0; k],
        condition: f64::NAN,
    };
    // B'[p][k] = <g_p | e_k>; equals the component score plus <phi_p|u>.
    let proj = model.projection_functions();
    let w = lib.grid().weights(flavor.weighting());
    let mut bpt = Mat::zeros(k, k);
    for p in 0..k {
        for (g, gas) in lib.gases().iter().enumerate() {
            bpt[(p, g)] = inner_product_slices(proj.row(p), gas.spectrum.values(), w);
        }
    }
    let condition = condition_number(&bpt)?;
    if !condition.is_finite() {
        return Err(Error::DegenerateLibrary(
            "projected shape matrix is singular".into(),
        ));
    }
    model.beta_prime_t = bpt;
    model.condition = condition;

    let learn_b = matches!(b_mode, BMode::Learn);
    let learn_noise = matches!(noise_mode, NoiseMode::Learn);
    if let BMode::Known(b) = b_mode {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::invalid("known path length must be positive"));
        }
        model.b = b;
    }
    if !learn_b && !learn_noise {
        return Ok(model);
    }

    let cal = calibration.ok_or_else(|| {
        Error::invalid("calibration dataset required to learn b or noise projections")
    })?;
    if cal.n_samples() < 2 {
        return Err(Error::Underdetermined {
            samples: cal.n_samples(),
            needed: 2,
        });
    }
    if cal.n_gases() != k || !crate::grid::same_grid(&cal.grid, lib.grid()) {
        return Err(Error::GridMismatch);
    }
    let a_tilde = model.project_raw(&cal.absorbances)?;
    // g_i = B'^T eps C_i (path length excluded)
    let n = cal.n_samples();
    let mut g_mat = Mat::zeros(n, k);
    for i in 0..n {
        let c = cal.concentrations.row(i);
        for p in 0..k {
            let mut acc = 0.0;
            for gas in 0..k {
                acc += model.beta_prime_t[(p, gas)] * model.eps_norms[gas] * c[gas];
            }
            g_mat[(i, p)] = acc;
        }
    }

    let n_unknowns = usize::from(learn_b) + if learn_noise { k } else { 0 };
    let rows = n * k;
    if rows < n_unknowns {
        return Err(Error::Underdetermined {
            samples: rows,
            needed: n_unknowns,
        });
    }
    let mut design = Mat::zeros(rows, n_unknowns);
    let mut rhs = Mat::zeros(rows, 1);
    for i in 0..n {
        for p in 0..k {
            let r = i * k + p;
            let mut col = 0;
            if learn_b {
                design[(r, col)] = g_mat[(i, p)];
                col += 1;
            }
            if learn_noise {
                design[(r, col + p)] = 1.0;
            }
            let mut target = a_tilde[(i, p)];
            if !learn_b {
                target -= model.b * g_mat[(i, p)];
            }
            rhs[(r, 0)] = target;
        }
    }
    let sol = lstsq(&design, &rhs, "training-free calibration")?;
    let mut col = 0;
    if learn_b {
        let b = sol[(col, 0)];
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::Conditioning {
                what: "learned path length".into(),
                condition: b,
            });
        }
        model.b = b;
        col += 1;
    }
    if learn_noise {
        for p in 0..k {
            model.n_prime[p] = sol[(col + p, 0)];
        }
    }
    Ok(model)
}

/// Residual noise spectra and mean noise power of samples with known
/// concentrations, under a trained model's forward parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemNoiseEstimate {
    /// `n x m` residual spectra.
    pub noise: Mat,
    /// Mean over samples of `<n_i|n_i>` (plain weighting).
    pub mean_power: f64,
}

pub fn estimate_system_noise(model: &TfModel, samples: &SpectraDataset) -> Result<SystemNoiseEstimate> {
    if samples.n_gases() != model.gas_names.len()
        || !crate::grid::same_grid(&samples.grid, model.basis.grid())
    {
        return Err(Error::GridMismatch);
    }
    let shapes = model.reconstructed_shapes();
    let norms = &model.eps_norms;
    let b = model.b;
    let k = model.gas_names.len();
    let mut noise = Mat::zeros(samples.n_samples(), samples.n_wavelengths());
    {
        let conc = &samples.concentrations;
        let abs = &samples.absorbances;
        let shapes_ref = &shapes;
        for_each_row_indexed(&mut noise, |i, row| {
            row.copy_from_slice(abs.row(i));
            let c = conc.row(i);
            for g in 0..k {
                let f = b * c[g] * norms[g];
                if f != 0.0 {
                    math::axpy(-f, shapes_ref.row(g), row);
                }
            }
        });
    }
    let powers: Vec<f64> =
        crate::linalg::par_map_indexed(noise.rows(), |i| math::dot(noise.row(i), noise.row(i)));
    let mean_power = powers.iter().sum::<f64>() / noise.rows().max(1) as f64;
    Ok(SystemNoiseEstimate { noise, mean_power })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::{synthesize_library, LibraryProfile};
    use crate::grid::WavelengthGrid;
    use crate::synth::{forward_spectrum, generate_dataset, GroupPreset, NoiseSpec};

    fn lib() -> GasLibrary {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 240).unwrap();
        synthesize_library(7, &grid, &LibraryProfile::DefaultNineGas).unwrap()
    }

    #[test]
    fn known_b_noiseless_prediction_is_exact() {
        let lib = lib();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Known(1.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap();
        let ds = generate_dataset(&lib, &GroupPreset::I.scheme(), 20, 1.0, None, 3).unwrap();
        let pred = model.predict(&ds.absorbances).unwrap();
        let scale = ds.concentrations.max_abs();
        for (p, t) in pred.data().iter().zip(ds.concentrations.data()) {
            assert!((p - t).abs() <= 1e-8 * scale, "{p} vs {t}");
        }
    }

    #[test]
    fn centered_mode_is_also_exact() {
        let lib = lib();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            true,
            BMode::Known(1.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap();
        assert!(model.mean_appended());
        let ds = generate_dataset(&lib, &GroupPreset::I.scheme(), 10, 1.0, None, 5).unwrap();
        let pred = model.predict(&ds.absorbances).unwrap();
        let scale = ds.concentrations.max_abs();
        for (p, t) in pred.data().iter().zip(ds.concentrations.data()) {
            assert!((p - t).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn beta_prime_matches_score_plus_mean_projection() {
        let lib = lib();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Known(1.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap();
        // uncentered: <phi_p|u> = 0, so B'[p][k] equals the shape score.
        let scores = project(model.basis(), &lib.shapes()).unwrap().scores;
        for p in 0..9 {
            for k in 0..9 {
                assert!(
                    (model.beta_prime_t()[(p, k)] - scores[(k, p)]).abs() < 1e-10,
                    "({p},{k})"
                );
            }
        }
    }

    #[test]
    fn prediction_scales_linearly_with_spectrum() {
        let lib = lib();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Known(1.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap();
        let mut c = [0.0; 9];
        c[2] = 3e-6;
        c[7] = 1e-6;
        let s = forward_spectrum(&lib, &c, 1.0, None, 0).unwrap();
        let m = s.values().len();
        let one = Mat::from_vec(1, m, s.values().to_vec());
        let two = Mat::from_vec(1, m, s.values().iter().map(|v| 2.0 * v).collect());
        let p1 = model.predict(&one).unwrap();
        let p2 = model.predict(&two).unwrap();
        for g in 0..9 {
            assert!((p2[(0, g)] - 2.0 * p1[(0, g)]).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_concentration_recovered_exactly() {
        let lib = lib();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Known(1.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap();
        // 100 uM: far beyond any plausible training range
        let mut c = [0.0; 9];
        c[0] = 100e-6;
        let s = forward_spectrum(&lib, &c, 1.0, None, 0).unwrap();
        let x = Mat::from_vec(1, s.values().len(), s.values().to_vec());
        let p = model.predict(&x).unwrap();
        assert!((p[(0, 0)] - 100e-6).abs() <= 1e-8 * 100e-6);
        for g in 1..9 {
            assert!(p[(0, g)].abs() <= 1e-8 * 100e-6);
        }
    }

    #[test]
    fn noiseless_calibration_learns_zero_noise_and_true_b() {
        let lib = lib();
        let ds = generate_dataset(&lib, &GroupPreset::I.scheme(), 12, 2.5, None, 7).unwrap();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Learn,
            NoiseMode::Learn,
            Some(&ds),
        )
        .unwrap();
        assert!(
            (model.b() - 2.5).abs() < 1e-8 * 2.5,
            "learned b {}",
            model.b()
        );
        let a_scale = ds.absorbances.max_abs();
        for &np in model.n_prime() {
            assert!(np.abs() <= 1e-8 * a_scale);
        }
    }

    #[test]
    fn calibration_required_and_sized() {
        let lib = lib();
        assert!(matches!(
            fit_tf(
                &lib,
                Flavor::Functional,
                false,
                BMode::Learn,
                NoiseMode::Zero,
                None
            ),
            Err(Error::InvalidArgument(_))
        ));
        let ds = generate_dataset(&lib, &GroupPreset::I.scheme(), 1, 1.0, None, 9).unwrap();
        assert!(matches!(
            fit_tf(
                &lib,
                Flavor::Functional,
                false,
                BMode::Learn,
                NoiseMode::Learn,
                Some(&ds)
            ),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn duplicate_shapes_are_degenerate() {
        let grid = WavelengthGrid::uniform(2.0, 4.0, 32).unwrap();
        let mut v1 = alloc::vec![0.0; 32];
        v1[4] = 1.0;
        v1[5] = 0.5;
        let s1 = crate::grid::Spectrum::new(grid.clone(), v1.clone()).unwrap();
        let s2 = crate::grid::Spectrum::new(grid.clone(), v1).unwrap();
        let lib = GasLibrary::from_raw(
            grid,
            alloc::vec![("a".into(), s1, 2.0), ("b".into(), s2, 1.0)],
        )
        .unwrap();
        let err = fit_tf(
            &lib,
            Flavor::Plain,
            false,
            BMode::Known(1.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap_err();
        assert!(matches!(err, Error::DegenerateLibrary(_)));
    }

    #[test]
    fn system_noise_power_matches_variance_oracle() {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 1000).unwrap();
        let lib = synthesize_library(7, &grid, &LibraryProfile::DefaultNineGas).unwrap();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Known(20.0),
            NoiseMode::Zero,
            None,
        )
        .unwrap();
        // noiseless: residual power vanishes
        let clean = generate_dataset(&lib, &GroupPreset::I.scheme(), 50, 20.0, None, 11).unwrap();
        let est = estimate_system_noise(&model, &clean).unwrap();
        let a_scale = clean.absorbances.max_abs();
        assert!(
            est.mean_power <= 1e-16 * (a_scale * a_scale * 1000.0).max(1.0),
            "noiseless power {}",
            est.mean_power
        );
        // 30 dB: mean power ~ M sigma^2 / ln(10)^2 within 10 percent
        let noise = NoiseSpec::from_snr_db(30.0).unwrap();
        let noisy =
            generate_dataset(&lib, &GroupPreset::I.scheme(), 400, 20.0, Some(noise), 13).unwrap();
        let est30 = estimate_system_noise(&model, &noisy).unwrap();
        let want = 1000.0 * noise.sigma() * noise.sigma() / (crate::math::LN_10 * crate::math::LN_10);
        assert!(
            (est30.mean_power - want).abs() < 0.1 * want,
            "power {} vs {want}",
            est30.mean_power
        );
        // monotone in noise level
        let mut prev = est30.mean_power;
        for snr in [20.0, 10.0] {
            let ns = NoiseSpec::from_snr_db(snr).unwrap();
            let ds =
                generate_dataset(&lib, &GroupPreset::I.scheme(), 100, 20.0, Some(ns), 13).unwrap();
            let e = estimate_system_noise(&model, &ds).unwrap();
            assert!(e.mean_power > prev);
            prev = e.mean_power;
        }
    }

    #[test]
    fn derived_bias_matches_affine_map() {
        let lib = lib();
        let noise = NoiseSpec::from_snr_db(30.0).unwrap();
        let cal = generate_dataset(&lib, &GroupPreset::I.scheme(), 40, 1.0, Some(noise), 15).unwrap();
        let model = fit_tf(
            &lib,
            Flavor::Functional,
            false,
            BMode::Known(1.0),
            NoiseMode::Learn,
            Some(&cal),
        )
        .unwrap();
        // predicting the zero spectrum must give exactly the bias vector
        let zero = Mat::zeros(1, lib.grid().len());
        let p = model.predict(&zero).unwrap();
        let bias = model.bias().unwrap();
        let scale = bias.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        for g in 0..9 {
            assert!((p[(0, g)] - bias[g]).abs() <= 1e-12 * scale);
        }
    }
}
