//! Score-space linear regression and its sparsified direct form.
//!
//! The regression learns `C_i = Lambda beta_i + kappa` by ordinary least
//! squares of training concentrations on component scores. The direct model
//! keeps only the few leading entries of each row of `Lambda` and refits the
//! retained coefficients and bias. `estimate_overlap_noise` solves the same
//! linear relation in the opposite direction, recovering the overlap matrix
//! `b psi eps` and the expected noise projections as a diagnostic.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::{lstsq, Mat};
use crate::math;
use crate::pca::{project, PcBasis};
use crate::synth::SpectraDataset;
use crate::Result;

/// Trained score-to-concentration regression.
#[derive(Debug, Clone, PartialEq)]
pub struct LrModel {
    basis: PcBasis,
    gas_names: Vec<String>,
    /// `K x L`: concentrations = lambda * scores + kappa.
    lambda: Mat,
    kappa: Vec<f64>,
    /// In-sample per-gas RMSE of the fit.
    in_sample_rmse: Vec<f64>,
}

impl LrModel {
    pub fn basis(&self) -> &PcBasis {
        &self.basis
    }

    pub fn gas_names(&self) -> &[String] {
        &self.gas_names
    }

    pub fn lambda(&self) -> &Mat {
        &self.lambda
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn in_sample_rmse(&self) -> &[f64] {
        &self.in_sample_rmse
    }

    pub fn from_parts(
        basis: PcBasis,
        gas_names: Vec<String>,
        lambda: Mat,
        kappa: Vec<f64>,
        in_sample_rmse: Vec<f64>,
    ) -> Result<Self> {
        if lambda.rows() != gas_names.len() || lambda.cols() != basis.len() {
            return Err(Error::DimensionMismatch {
                what: "regression weight matrix".into(),
                expected: gas_names.len() * basis.len(),
                got: lambda.rows() * lambda.cols(),
            });
        }
        if kappa.len() != gas_names.len() {
            return Err(Error::DimensionMismatch {
                what: "regression bias".into(),
                expected: gas_names.len(),
                got: kappa.len(),
            });
        }
        Ok(LrModel {
            basis,
            gas_names,
            lambda,
            kappa,
            in_sample_rmse,
        })
    }

    /// Project spectra onto the basis and apply the affine map. Negative
    /// outputs are reported as-is.
    pub fn predict(&self, spectra: &Mat) -> Result<Mat> {
        let scores = project(&self.basis, spectra)?;
        Ok(apply_affine(&scores.scores, &self.lambda, &self.kappa))
    }

    /// `diag(norms) * Lambda`, the matrix whose structure reveals the
    /// component-to-gas correspondence.
    pub fn eps_lambda(&self, norms: &[f64]) -> Result<Mat> {
        if norms.len() != self.lambda.rows() {
            return Err(Error::DimensionMismatch {
                what: "norm vector".into(),
                expected: self.lambda.rows(),
                got: norms.len(),
            });
        }
        let mut out = self.lambda.clone();
        for (k, &nk) in norms.iter().enumerate() {
            for v in out.row_mut(k) {
                *v *= nk;
            }
        }
        Ok(out)
    }
}

pub(crate) fn apply_affine(scores: &Mat, lambda: &Mat, kappa: &[f64]) -> Mat {
    let k = lambda.rows();
    let mut out = Mat::zeros(scores.rows(), k);
    crate::linalg::for_each_row_indexed(&mut out, |i, row| {
        let beta = scores.row(i);
        for (p, slot) in row.iter_mut().enumerate() {
            *slot = kappa[p] + math::dot(lambda.row(p), beta);
        }
    });
    out
}

fn check_overdetermined(n: usize, unknowns_per_response: usize) -> Result<()> {
    if n <= unknowns_per_response {
        return Err(Error::Underdetermined {
            samples: n,
            needed: unknowns_per_response + 1,
        });
    }
    Ok(())
}

/// Fit the linear regression of concentrations on component scores.
///
/// Requires more samples than unknowns per gas (`n > L + 1`).
pub fn fit_lr(basis: &PcBasis, training: &SpectraDataset) -> Result<LrModel> {
    let n = training.n_samples();
    let l = basis.len();
    let k = training.n_gases();
    check_overdetermined(n, l.max(k) + 1)?;
    let scores = project(basis, &training.absorbances)?;
    let mut design = Mat::zeros(n, l + 1);
    for i in 0..n {
        let row = design.row_mut(i);
        row[..l].copy_from_slice(scores.scores.row(i));
        row[l] = 1.0;
    }
    let coef = lstsq(&design, &training.concentrations, "score regression")?;
    let mut lambda = Mat::zeros(k, l);
    let mut kappa = Vec::with_capacity(k);
    for p in 0..k {
        for q in 0..l {
            lambda[(p, q)] = coef[(q, p)];
        }
        kappa.push(coef[(l, p)]);
    }
    let preds = apply_affine(&scores.scores, &lambda, &kappa);
    let in_sample_rmse = per_gas_rmse(&preds, &training.concentrations);
    Ok(LrModel {
        basis: basis.clone(),
        gas_names: training.gas_names.clone(),
        lambda,
        kappa,
        in_sample_rmse,
    })
}

pub(crate) fn per_gas_rmse(pred: &Mat, truth: &Mat) -> Vec<f64> {
    let n = pred.rows();
    let k = pred.cols();
    let mut acc = alloc::vec![0.0; k];
    for i in 0..n {
        let p = pred.row(i);
        let t = truth.row(i);
        for g in 0..k {
            let d = p[g] - t[g];
            acc[g] += d * d;
        }
    }
    acc.iter().map(|&s| math::sqrt(s / n as f64)).collect()
}

/// Overlap/noise estimate recovered from training data alone.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapNoiseEstimate {
    /// `P x K` estimate of `b psi eps` (component by gas).
    pub b_psi_eps: Mat,
    /// Expected noise projection per component, mean-corrected.
    pub n_exp: Vec<f64>,
    /// Residual RMS of the fitted relation, per component.
    pub residual_rms: Vec<f64>,
}

/// Estimate the overlap matrix `b psi eps` and the expected noise
/// projections by regressing scores on concentrations.
///
/// Solves `beta_p = sum_k M_pk c_k + (nu_p - <phi_p|u>)` in the least-squares
/// sense over all samples; the mean projection is added back so `n_exp`
/// reports `nu` itself.
pub fn estimate_overlap_noise(
    basis: &PcBasis,
    training: &SpectraDataset,
) -> Result<OverlapNoiseEstimate> {
    let n = training.n_samples();
    let k = training.n_gases();
    check_overdetermined(n, k + 1)?;
    let scores = project(basis, &training.absorbances)?;
    let p_count = basis.len();
    let mut design = Mat::zeros(n, k + 1);
    for i in 0..n {
        let row = design.row_mut(i);
        row[..k].copy_from_slice(training.concentrations.row(i));
        row[k] = 1.0;
    }
    let coef = lstsq(&design, &scores.scores, "overlap estimation")?;
    let mean_proj = basis.mean_projections();
    let mut b_psi_eps = Mat::zeros(p_count, k);
    let mut n_exp = Vec::with_capacity(p_count);
    for p in 0..p_count {
        for g in 0..k {
            b_psi_eps[(p, g)] = coef[(g, p)];
        }
        n_exp.push(coef[(k, p)] + mean_proj[p]);
    }
    // residual of the fitted relation
    let mut residual_rms = alloc::vec![0.0; p_count];
    for i in 0..n {
        let c = training.concentrations.row(i);
        let b = scores.scores.row(i);
        for p in 0..p_count {
            let fit = math::dot(b_psi_eps.row(p), c) + coef[(k, p)];
            let d = b[p] - fit;
            residual_rms[p] += d * d;
        }
    }
    for r in residual_rms.iter_mut() {
        *r = math::sqrt(*r / n as f64);
    }
    Ok(OverlapNoiseEstimate {
        b_psi_eps,
        n_exp,
        residual_rms,
    })
}

/// How many leading weight-matrix entries each gas keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RetainSpec {
    Global(usize),
    PerGas(Vec<usize>),
}

impl RetainSpec {
    fn count_for(&self, gas: usize, max: usize) -> Result<usize> {
        let m = match self {
            RetainSpec::Global(m) => *m,
            RetainSpec::PerGas(v) => *v.get(gas).ok_or_else(|| {
                Error::invalid(format!("retain list too short for gas {gas}"))
            })?,
        };
        if m == 0 || m > max {
            return Err(Error::invalid(format!(
                "retain count must be in [1, {max}], got {m}"
            )));
        }
        Ok(m)
    }
}

/// Direct quantification: per-gas prediction from a few leading entries of
/// the regression weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectModel {
    basis: PcBasis,
    gas_names: Vec<String>,
    /// `K x L` with exact zeros outside the retained entries.
    lambda_sparse: Mat,
    kappa: Vec<f64>,
    retain_counts: Vec<usize>,
}

impl DirectModel {
    pub fn basis(&self) -> &PcBasis {
        &self.basis
    }

    pub fn gas_names(&self) -> &[String] {
        &self.gas_names
    }

    pub fn lambda_sparse(&self) -> &Mat {
        &self.lambda_sparse
    }

    pub fn kappa(&self) -> &[f64] {
        &self.kappa
    }

    pub fn retain_counts(&self) -> &[usize] {
        &self.retain_counts
    }

    pub fn from_parts(
        basis: PcBasis,
        gas_names: Vec<String>,
        lambda_sparse: Mat,
        kappa: Vec<f64>,
        retain_counts: Vec<usize>,
    ) -> Result<Self> {
        if lambda_sparse.rows() != gas_names.len() || kappa.len() != gas_names.len() {
            return Err(Error::DimensionMismatch {
                what: "direct model".into(),
                expected: gas_names.len(),
                got: lambda_sparse.rows(),
            });
        }
        Ok(DirectModel {
            basis,
            gas_names,
            lambda_sparse,
            kappa,
            retain_counts,
        })
    }

    pub fn predict(&self, spectra: &Mat) -> Result<Mat> {
        let scores = project(&self.basis, spectra)?;
        Ok(apply_affine(&scores.scores, &self.lambda_sparse, &self.kappa))
    }
}

/// Sparsify a trained regression to its leading row entries, refitting the
/// retained coefficients and the bias on the training scores.
pub fn sparsify_to_direct(
    model: &LrModel,
    training: &SpectraDataset,
    retain: &RetainSpec,
) -> Result<DirectModel> {
    let n = training.n_samples();
    let l = model.basis.len();
    let k = model.gas_names.len();
    let scores = project(&model.basis, &training.absorbances)?;
    let mut lambda_sparse = Mat::zeros(k, l);
    let mut kappa = Vec::with_capacity(k);
    let mut retain_counts = Vec::with_capacity(k);
    for gas in 0..k {
        let m = retain.count_for(gas, l)?;
        check_overdetermined(n, m + 1)?;
        // rank this gas's weights by magnitude, stable for ties
        let mut order: Vec<usize> = (0..l).collect();
        let row = model.lambda.row(gas);
        order.sort_by(|&a, &b| {
            math::abs(row[b])
                .partial_cmp(&math::abs(row[a]))
                .expect("non-finite weight")
        });
        let mut kept: Vec<usize> = order[..m].to_vec();
        kept.sort_unstable();
        let mut design = Mat::zeros(n, m + 1);
        for i in 0..n {
            let b = scores.scores.row(i);
            let drow = design.row_mut(i);
            for (j, &idx) in kept.iter().enumerate() {
                drow[j] = b[idx];
            }
            drow[m] = 1.0;
        }
        let mut rhs = Mat::zeros(n, 1);
        for i in 0..n {
            rhs[(i, 0)] = training.concentrations[(i, gas)];
        }
        let coef = lstsq(&design, &rhs, "direct-model refit")?;
        for (j, &idx) in kept.iter().enumerate() {
            lambda_sparse[(gas, idx)] = coef[(j, 0)];
        }
        kappa.push(coef[(m, 0)]);
        retain_counts.push(m);
    }
    Ok(DirectModel {
        basis: model.basis.clone(),
        gas_names: model.gas_names.clone(),
        lambda_sparse,
        kappa,
        retain_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gas::{synthesize_library, GasLibrary, LibraryProfile};
    use crate::grid::WavelengthGrid;
    use crate::pca::{fit_pca, Flavor};
    use crate::synth::{generate_dataset, GroupPreset, NoiseSpec, SpectraDataset};

    fn lib_and_data(n: usize, noise: Option<NoiseSpec>, seed: u64) -> (GasLibrary, SpectraDataset) {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 240).unwrap();
        let lib = synthesize_library(7, &grid, &LibraryProfile::DefaultNineGas).unwrap();
        let ds = generate_dataset(&lib, &GroupPreset::I.scheme(), n, 10.0, noise, seed).unwrap();
        (lib, ds)
    }

    #[test]
    fn noiseless_training_is_fit_exactly() {
        let (_lib, ds) = lib_and_data(80, None, 3);
        let basis = fit_pca(&ds.absorbances, &ds.grid, Flavor::Functional, true, 9).unwrap();
        let model = fit_lr(&basis, &ds).unwrap();
        let pred = model.predict(&ds.absorbances).unwrap();
        let scale = ds.concentrations.max_abs();
        for (p, t) in pred.data().iter().zip(ds.concentrations.data()) {
            assert!((p - t).abs() <= 1e-8 * scale, "{p} vs {t}");
        }
    }

    #[test]
    fn prediction_is_affine() {
        let (_lib, ds) = lib_and_data(60, Some(NoiseSpec::from_snr_db(30.0).unwrap()), 5);
        let basis = fit_pca(&ds.absorbances, &ds.grid, Flavor::Functional, true, 9).unwrap();
        let model = fit_lr(&basis, &ds).unwrap();
        let m = ds.n_wavelengths();
        let a1 = Mat::from_vec(1, m, ds.absorbances.row(0).to_vec());
        let a2 = Mat::from_vec(1, m, ds.absorbances.row(1).to_vec());
        let mut u = Mat::zeros(1, m);
        u.row_mut(0).copy_from_slice(basis.mean());
        let combo_vals: Vec<f64> = (0..m)
            .map(|j| a1[(0, j)] + a2[(0, j)] - basis.mean()[j])
            .collect();
        let combo = Mat::from_vec(1, m, combo_vals);
        let p1 = model.predict(&a1).unwrap();
        let p2 = model.predict(&a2).unwrap();
        let pu = model.predict(&u).unwrap();
        let pc = model.predict(&combo).unwrap();
        for g in 0..9 {
            let want = p1[(0, g)] + p2[(0, g)] - pu[(0, g)];
            assert!((pc[(0, g)] - want).abs() < 1e-10);
        }
        // mean spectrum maps to kappa
        for g in 0..9 {
            assert!((pu[(0, g)] - model.kappa()[g]).abs() < 1e-12);
        }
    }

    #[test]
    fn underdetermined_training_is_rejected() {
        let (_lib, ds) = lib_and_data(30, None, 7);
        let small = ds.select_rows(&[0, 1, 2, 3, 4]);
        let basis = fit_pca(&small.absorbances, &small.grid, Flavor::Functional, true, 5).unwrap();
        // 9 components cannot even be requested with 5 samples; with the
        // 5-sample basis the regression is still underdetermined.
        assert!(matches!(
            fit_lr(&basis, &small),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn overlap_noise_estimate_matches_direct_inner_products() {
        let (lib, ds) = lib_and_data(400, None, 9);
        let basis = fit_pca(&ds.absorbances, &ds.grid, Flavor::Functional, true, 9).unwrap();
        let est = estimate_overlap_noise(&basis, &ds).unwrap();
        // oracle: psi entries by explicit inner products against the library
        let w = ds.grid.weights(Flavor::Functional.weighting());
        let b = ds.path_length_cm;
        let mut max_entry = 0.0f64;
        let mut max_dev = 0.0f64;
        for p in 0..9 {
            for k in 0..9 {
                let psi = crate::grid::inner_product_slices(
                    basis.component(p),
                    lib.gases()[k].spectrum.values(),
                    w,
                );
                let want = b * psi * lib.gases()[k].norm;
                max_entry = max_entry.max(math::abs(want));
                max_dev = max_dev.max(math::abs(est.b_psi_eps[(p, k)] - want));
            }
        }
        assert!(
            max_dev <= 1e-3 * max_entry,
            "max deviation {max_dev} vs scale {max_entry}"
        );
        // noiseless: corrected noise expectation vanishes
        let score_scale = max_entry.max(1e-30);
        for (p, &nu) in est.n_exp.iter().enumerate() {
            assert!(
                math::abs(nu) <= 1e-8 * score_scale,
                "component {p}: nu {nu}"
            );
        }
        for &r in &est.residual_rms {
            assert!(r < 1e-8);
        }
    }

    #[test]
    fn overlap_estimate_scales_linearly_with_path_length() {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 240).unwrap();
        let lib = synthesize_library(7, &grid, &LibraryProfile::DefaultNineGas).unwrap();
        let scheme = GroupPreset::I.scheme();
        let ds1 = generate_dataset(&lib, &scheme, 300, 1.0, None, 11).unwrap();
        let ds2 = generate_dataset(&lib, &scheme, 300, 2.0, None, 11).unwrap();
        let b1 = fit_pca(&ds1.absorbances, &ds1.grid, Flavor::Functional, true, 9).unwrap();
        let e1 = estimate_overlap_noise(&b1, &ds1).unwrap();
        let e2 = estimate_overlap_noise(&b1, &ds2).unwrap();
        let scale = e1.b_psi_eps.max_abs();
        for p in 0..9 {
            for k in 0..9 {
                let d = e2.b_psi_eps[(p, k)] - 2.0 * e1.b_psi_eps[(p, k)];
                assert!(math::abs(d) <= 1e-6 * scale, "entry ({p},{k})");
            }
        }
    }

    #[test]
    fn full_retain_matches_dense_regression() {
        let (_lib, ds) = lib_and_data(120, Some(NoiseSpec::from_snr_db(40.0).unwrap()), 13);
        let basis = fit_pca(&ds.absorbances, &ds.grid, Flavor::Functional, true, 9).unwrap();
        let lr = fit_lr(&basis, &ds).unwrap();
        let direct = sparsify_to_direct(&lr, &ds, &RetainSpec::Global(9)).unwrap();
        let pl = lr.predict(&ds.absorbances).unwrap();
        let pd = direct.predict(&ds.absorbances).unwrap();
        let scale = pl.max_abs();
        for (a, b) in pl.data().iter().zip(pd.data()) {
            assert!((a - b).abs() <= 1e-10 * scale.max(1e-30));
        }
    }

    #[test]
    fn sparsified_weights_are_exactly_zero_off_support() {
        let (_lib, ds) = lib_and_data(120, Some(NoiseSpec::from_snr_db(40.0).unwrap()), 15);
        let basis = fit_pca(&ds.absorbances, &ds.grid, Flavor::Functional, true, 9).unwrap();
        let lr = fit_lr(&basis, &ds).unwrap();
        let direct = sparsify_to_direct(&lr, &ds, &RetainSpec::Global(2)).unwrap();
        for gas in 0..9 {
            let nnz = direct
                .lambda_sparse()
                .row(gas)
                .iter()
                .filter(|&&v| v != 0.0)
                .count();
            assert!(nnz <= 2);
        }
        assert_eq!(direct.retain_counts(), &[2; 9]);
    }

    #[test]
    fn retain_spec_bounds_are_checked() {
        let (_lib, ds) = lib_and_data(60, None, 17);
        let basis = fit_pca(&ds.absorbances, &ds.grid, Flavor::Functional, true, 9).unwrap();
        let lr = fit_lr(&basis, &ds).unwrap();
        assert!(sparsify_to_direct(&lr, &ds, &RetainSpec::Global(0)).is_err());
        assert!(sparsify_to_direct(&lr, &ds, &RetainSpec::Global(10)).is_err());
    }
}
