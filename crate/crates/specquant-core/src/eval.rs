//! Evaluation protocols: k-fold testing, component-count and training-size
//! sweeps, and the out-of-range study with saturation fits.
//!
//! Every split is derived from a seeded shuffle; per-fold training never sees
//! held-out rows (including basis fitting), and all sweep orderings are
//! deterministic prefixes.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::gas::GasLibrary;
use crate::linalg::Mat;
use crate::math;
use crate::pca::{fit_pca, Flavor, PcBasis};
use crate::quant::{
    fit_lr, fit_plsr, fit_tf, sparsify_to_direct, BMode, DirectModel, LrModel, NoiseMode,
    PlsrModel, RetainSpec, TfModel,
};
use crate::rng::shuffled_indices;
use crate::synth::SpectraDataset;
use crate::Result;

/// Decomposition configuration shared by the harness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnessOptions {
    pub flavor: Flavor,
    pub centered: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        HarnessOptions {
            flavor: Flavor::Functional,
            centered: true,
        }
    }
}

/// Which quantifier the harness trains.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Lr {
        components: usize,
    },
    Direct {
        components: usize,
        retain: RetainSpec,
    },
    /// Training-free model; `calibration = 0` uses the whole training split.
    Tf {
        learn_b: bool,
        learn_noise: bool,
        calibration: usize,
    },
    Plsr {
        components: usize,
    },
    /// Constant-mean predictor (the random-guess baseline).
    Mean,
}

impl ModelKind {
    pub fn name(&self) -> String {
        match self {
            ModelKind::Lr { components } => format!("lr-{components}"),
            ModelKind::Direct { components, retain } => match retain {
                RetainSpec::Global(m) => format!("direct-{components}-m{m}"),
                RetainSpec::PerGas(_) => format!("direct-{components}-per-gas"),
            },
            ModelKind::Tf {
                learn_b,
                learn_noise,
                calibration,
            } => format!(
                "tf-{}-{}-c{calibration}",
                if *learn_b { "learnb" } else { "knownb" },
                if *learn_noise { "learnn" } else { "zeron" }
            ),
            ModelKind::Plsr { components } => format!("plsr-{components}"),
            ModelKind::Mean => "mean".into(),
        }
    }

    fn basis_components(&self) -> Option<usize> {
        match self {
            ModelKind::Lr { components } | ModelKind::Direct { components, .. } => {
                Some(*components)
            }
            _ => None,
        }
    }

    fn needs_library(&self) -> bool {
        matches!(self, ModelKind::Tf { .. })
    }
}

/// A fitted quantifier of any kind.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedQuantifier {
    Lr(LrModel),
    Direct(DirectModel),
    Tf(TfModel),
    Plsr(PlsrModel),
    Mean(Vec<f64>),
}

impl TrainedQuantifier {
    pub fn predict(&self, spectra: &Mat) -> Result<Mat> {
        match self {
            TrainedQuantifier::Lr(m) => m.predict(spectra),
            TrainedQuantifier::Direct(m) => m.predict(spectra),
            TrainedQuantifier::Tf(m) => m.predict(spectra),
            TrainedQuantifier::Plsr(m) => m.predict(spectra),
            TrainedQuantifier::Mean(mu) => {
                let mut out = Mat::zeros(spectra.rows(), mu.len());
                for i in 0..out.rows() {
                    out.row_mut(i).copy_from_slice(mu);
                }
                Ok(out)
            }
        }
    }
}

/// Fit one model kind on a training set.
///
/// `shared_basis` lets callers reuse one decomposition across several
/// regression variants; its leading components match a dedicated fit.
pub fn fit_model(
    kind: &ModelKind,
    train: &SpectraDataset,
    lib: Option<&GasLibrary>,
    opts: &HarnessOptions,
    shared_basis: Option<&PcBasis>,
) -> Result<TrainedQuantifier> {
    match kind {
        ModelKind::Lr { components } => {
            if train.n_samples() <= components + 1 {
                return Err(Error::Underdetermined {
                    samples: train.n_samples(),
                    needed: components + 2,
                });
            }
            let basis = obtain_basis(train, opts, *components, shared_basis)?;
            Ok(TrainedQuantifier::Lr(fit_lr(&basis, train)?))
        }
        ModelKind::Direct { components, retain } => {
            if train.n_samples() <= components + 1 {
                return Err(Error::Underdetermined {
                    samples: train.n_samples(),
                    needed: components + 2,
                });
            }
            let basis = obtain_basis(train, opts, *components, shared_basis)?;
            let lr = fit_lr(&basis, train)?;
            Ok(TrainedQuantifier::Direct(sparsify_to_direct(
                &lr, train, retain,
            )?))
        }
        ModelKind::Tf {
            learn_b,
            learn_noise,
            calibration,
        } => {
            let lib = lib.ok_or_else(|| {
                Error::invalid("training-free model requires a gas library")
            })?;
            let cal_ds;
            let cal: Option<&SpectraDataset> = if *learn_b || *learn_noise {
                if *calibration == 0 || *calibration >= train.n_samples() {
                    Some(train)
                } else {
                    let idx: Vec<usize> = (0..*calibration).collect();
                    cal_ds = train.select_rows(&idx);
                    Some(&cal_ds)
                }
            } else {
                None
            };
            let b_mode = if *learn_b {
                BMode::Learn
            } else {
                BMode::Known(train.path_length_cm)
            };
            let noise_mode = if *learn_noise {
                NoiseMode::Learn
            } else {
                NoiseMode::Zero
            };
            Ok(TrainedQuantifier::Tf(fit_tf(
                lib,
                opts.flavor,
                false,
                b_mode,
                noise_mode,
                cal,
            )?))
        }
        ModelKind::Plsr { components } => Ok(TrainedQuantifier::Plsr(fit_plsr(
            &train.absorbances,
            &train.concentrations,
            *components,
        )?)),
        ModelKind::Mean => Ok(TrainedQuantifier::Mean(column_means(
            &train.concentrations,
        ))),
    }
}

fn obtain_basis(
    train: &SpectraDataset,
    opts: &HarnessOptions,
    components: usize,
    shared: Option<&PcBasis>,
) -> Result<PcBasis> {
    if let Some(b) = shared {
        if b.len() >= components {
            return Ok(b.truncate(components));
        }
    }
    fit_pca(
        &train.absorbances,
        &train.grid,
        opts.flavor,
        opts.centered,
        components,
    )
}

fn column_means(m: &Mat) -> Vec<f64> {
    let mut acc = vec![0.0; m.cols()];
    for i in 0..m.rows() {
        math::axpy(1.0, m.row(i), &mut acc);
    }
    let inv = 1.0 / m.rows().max(1) as f64;
    acc.iter_mut().for_each(|v| *v *= inv);
    acc
}

/// Per-fold metrics kept for variance estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldMetrics {
    pub per_gas_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub n_test: usize,
}

/// Aggregated evaluation of one model on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub model: String,
    pub dataset: String,
    pub gas_names: Vec<String>,
    pub fold_count: usize,
    /// Pooled over all held-out predictions.
    pub per_gas_rmse: Vec<f64>,
    /// Mean over gases of the pooled per-gas RMSE.
    pub mean_rmse: f64,
    /// Mean absolute percentage error over held-out samples with true
    /// concentration > 0.
    pub per_gas_mape: Vec<f64>,
    /// How many held-out values were excluded from MAPE because the true
    /// concentration was exactly zero.
    pub mape_excluded_zeros: Vec<usize>,
    /// Population standard deviation of each gas over the whole dataset.
    pub random_guess_rmse: Vec<f64>,
    pub folds: Vec<FoldMetrics>,
}

/// Deterministic k-fold split: shuffled indices cut into `folds` blocks,
/// the last block taking the remainder.
pub fn split_indices(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if n < folds {
        return Err(Error::invalid(format!(
            "cannot split {n} samples into {folds} folds"
        )));
    }
    let shuffled = shuffled_indices(n, seed);
    let base = n / folds;
    let mut out = Vec::with_capacity(folds);
    for f in 0..folds {
        let start = f * base;
        let end = if f + 1 == folds { n } else { (f + 1) * base };
        out.push(shuffled[start..end].to_vec());
    }
    Ok(out)
}

fn population_std_per_gas(ds: &SpectraDataset) -> Vec<f64> {
    (0..ds.n_gases())
        .map(|g| {
            let col = ds.concentrations.col_copy(g);
            math::sqrt(math::population_variance(&col))
        })
        .collect()
}

fn check_library(kinds: &[ModelKind], ds: &SpectraDataset, lib: Option<&GasLibrary>) -> Result<()> {
    if kinds.iter().any(|k| k.needs_library()) {
        let lib = lib.ok_or_else(|| Error::invalid("model requires a gas library"))?;
        if lib.fingerprint() != ds.library_fingerprint {
            return Err(Error::invalid(
                "library fingerprint does not match the dataset",
            ));
        }
    }
    Ok(())
}

/// Evaluate several model kinds under one shared k-fold scheme.
///
/// Basis fitting happens once per fold at the largest component count any
/// regression variant needs; every model sees only the fold's training rows.
pub fn kfold_evaluate_many(
    kinds: &[ModelKind],
    ds: &SpectraDataset,
    lib: Option<&GasLibrary>,
    opts: &HarnessOptions,
    folds: usize,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    check_library(kinds, ds, lib)?;
    let n = ds.n_samples();
    let k = ds.n_gases();
    let blocks = split_indices(n, folds, seed)?;
    let random_guess = population_std_per_gas(ds);

    let mut sse = vec![vec![0.0f64; k]; kinds.len()];
    let mut held_out = vec![0usize; kinds.len()];
    let mut mape_sum = vec![vec![0.0f64; k]; kinds.len()];
    let mut mape_n = vec![vec![0usize; k]; kinds.len()];
    let mut zeros = vec![vec![0usize; k]; kinds.len()];
    let mut fold_metrics: Vec<Vec<FoldMetrics>> = vec![Vec::new(); kinds.len()];

    let l_shared = kinds.iter().filter_map(|kd| kd.basis_components()).max();

    for test_idx in &blocks {
        let mut train_idx: Vec<usize> = Vec::with_capacity(n - test_idx.len());
        let test_set: alloc::collections::BTreeSet<usize> = test_idx.iter().copied().collect();
        for block in &blocks {
            for &i in block {
                if !test_set.contains(&i) {
                    train_idx.push(i);
                }
            }
        }
        let train = ds.select_rows(&train_idx);
        let test = ds.select_rows(test_idx);
        let shared_basis = match l_shared {
            Some(l) => Some(fit_pca(
                &train.absorbances,
                &train.grid,
                opts.flavor,
                opts.centered,
                l,
            )?),
            None => None,
        };
        for (mi, kind) in kinds.iter().enumerate() {
            let model = fit_model(kind, &train, lib, opts, shared_basis.as_ref())?;
            let pred = model.predict(&test.absorbances)?;
            let mut fold_sse = vec![0.0f64; k];
            for i in 0..test.n_samples() {
                let p = pred.row(i);
                let t = test.concentrations.row(i);
                for g in 0..k {
                    let d = p[g] - t[g];
                    fold_sse[g] += d * d;
                    if t[g] > 0.0 {
                        mape_sum[mi][g] += math::abs(d) / t[g];
                        mape_n[mi][g] += 1;
                    } else {
                        zeros[mi][g] += 1;
                    }
                }
            }
            let nf = test.n_samples() as f64;
            let fold_rmse: Vec<f64> = fold_sse.iter().map(|&s| math::sqrt(s / nf)).collect();
            let fold_mean = math::mean(&fold_rmse);
            for g in 0..k {
                sse[mi][g] += fold_sse[g];
            }
            held_out[mi] += test.n_samples();
            fold_metrics[mi].push(FoldMetrics {
                per_gas_rmse: fold_rmse,
                mean_rmse: fold_mean,
                n_test: test.n_samples(),
            });
        }
    }

    let dataset_desc = describe_dataset(ds);
    Ok(kinds
        .iter()
        .enumerate()
        .map(|(mi, kind)| {
            let per_gas_rmse: Vec<f64> = sse[mi]
                .iter()
                .map(|&s| math::sqrt(s / held_out[mi] as f64))
                .collect();
            let per_gas_mape: Vec<f64> = (0..k)
                .map(|g| {
                    if mape_n[mi][g] > 0 {
                        mape_sum[mi][g] / mape_n[mi][g] as f64
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            EvalReport {
                model: kind.name(),
                dataset: dataset_desc.clone(),
                gas_names: ds.gas_names.clone(),
                fold_count: folds,
                mean_rmse: math::mean(&per_gas_rmse),
                per_gas_rmse,
                per_gas_mape,
                mape_excluded_zeros: zeros[mi].clone(),
                random_guess_rmse: random_guess.clone(),
                folds: fold_metrics[mi].clone(),
            }
        })
        .collect())
}

pub fn kfold_evaluate(
    kind: &ModelKind,
    ds: &SpectraDataset,
    lib: Option<&GasLibrary>,
    opts: &HarnessOptions,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    Ok(kfold_evaluate_many(core::slice::from_ref(kind), ds, lib, opts, folds, seed)?
        .pop()
        .expect("one report per kind"))
}

fn describe_dataset(ds: &SpectraDataset) -> String {
    match ds.noise {
        Some(ns) => format!("n{}-snr{}", ds.n_samples(), ns.snr_db()),
        None => format!("n{}-noiseless", ds.n_samples()),
    }
}

/// Score an externally produced prediction matrix against a dataset
/// (hook point for third-party models).
pub fn evaluate_predictions(pred: &Mat, ds: &SpectraDataset, model_name: &str) -> Result<EvalReport> {
    let n = ds.n_samples();
    let k = ds.n_gases();
    if pred.rows() != n || pred.cols() != k {
        return Err(Error::DimensionMismatch {
            what: "prediction matrix".into(),
            expected: n * k,
            got: pred.rows() * pred.cols(),
        });
    }
    let mut sse = vec![0.0f64; k];
    let mut mape_sum = vec![0.0f64; k];
    let mut mape_n = vec![0usize; k];
    let mut zeros = vec![0usize; k];
    for i in 0..n {
        let p = pred.row(i);
        let t = ds.concentrations.row(i);
        for g in 0..k {
            let d = p[g] - t[g];
            sse[g] += d * d;
            if t[g] > 0.0 {
                mape_sum[g] += math::abs(d) / t[g];
                mape_n[g] += 1;
            } else {
                zeros[g] += 1;
            }
        }
    }
    let per_gas_rmse: Vec<f64> = sse.iter().map(|&s| math::sqrt(s / n as f64)).collect();
    let per_gas_mape: Vec<f64> = (0..k)
        .map(|g| {
            if mape_n[g] > 0 {
                mape_sum[g] / mape_n[g] as f64
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(EvalReport {
        model: model_name.into(),
        dataset: describe_dataset(ds),
        gas_names: ds.gas_names.clone(),
        fold_count: 1,
        mean_rmse: math::mean(&per_gas_rmse),
        folds: vec![FoldMetrics {
            per_gas_rmse: per_gas_rmse.clone(),
            mean_rmse: math::mean(&per_gas_rmse),
            n_test: n,
        }],
        per_gas_rmse,
        per_gas_mape,
        mape_excluded_zeros: zeros,
        random_guess_rmse: population_std_per_gas(ds),
    })
}

/// RMSE table of the regression model against component count.
#[derive(Debug, Clone, PartialEq)]
pub struct PcCountSweep {
    pub gas_names: Vec<String>,
    /// Component counts actually evaluated; row `i` of the tables below
    /// corresponds to `ls[i]`. Row 0 is the intercept-only baseline (l = 0).
    pub ls: Vec<usize>,
    /// `(len(ls)) x K` per-gas test RMSE.
    pub rmse: Mat,
    /// `(len(ls) - 1) x K`, `delta[i] = rmse[ls[i+1]] - rmse[ls[i]]`.
    pub delta: Mat,
}

/// Refit the regression for every component count `0..=l_max` on one
/// deterministic 90:10 split; `l = 0` is the intercept-only baseline.
pub fn sweep_pc_count(
    ds: &SpectraDataset,
    opts: &HarnessOptions,
    l_max: usize,
    seed: u64,
) -> Result<PcCountSweep> {
    let blocks = split_indices(ds.n_samples(), 10, seed)?;
    let test_idx = &blocks[0];
    let test_set: alloc::collections::BTreeSet<usize> = test_idx.iter().copied().collect();
    let train_idx: Vec<usize> = (0..ds.n_samples()).filter(|i| !test_set.contains(i)).collect();
    let train = ds.select_rows(&train_idx);
    let test = ds.select_rows(test_idx);
    let k = ds.n_gases();

    let basis = fit_pca(
        &train.absorbances,
        &train.grid,
        opts.flavor,
        opts.centered,
        l_max,
    )?;
    let l_avail = basis.len();
    let ls: Vec<usize> = (0..=l_avail).collect();
    let mut rmse = Mat::zeros(l_avail + 1, k);

    // l = 0: intercept-only (mean predictor)
    let mu = column_means(&train.concentrations);
    {
        let mut sse = vec![0.0f64; k];
        for i in 0..test.n_samples() {
            let t = test.concentrations.row(i);
            for g in 0..k {
                let d = mu[g] - t[g];
                sse[g] += d * d;
            }
        }
        for g in 0..k {
            rmse[(0, g)] = math::sqrt(sse[g] / test.n_samples() as f64);
        }
    }
    for l in 1..=l_avail {
        let model = fit_lr(&basis.truncate(l), &train)?;
        let pred = model.predict(&test.absorbances)?;
        let mut sse = vec![0.0f64; k];
        for i in 0..test.n_samples() {
            let p = pred.row(i);
            let t = test.concentrations.row(i);
            for g in 0..k {
                let d = p[g] - t[g];
                sse[g] += d * d;
            }
        }
        for g in 0..k {
            rmse[(l, g)] = math::sqrt(sse[g] / test.n_samples() as f64);
        }
    }
    let mut delta = Mat::zeros(l_avail, k);
    for l in 1..=l_avail {
        for g in 0..k {
            delta[(l - 1, g)] = rmse[(l, g)] - rmse[(l - 1, g)];
        }
    }
    Ok(PcCountSweep {
        gas_names: ds.gas_names.clone(),
        ls,
        rmse,
        delta,
    })
}

/// One point of a training-size sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SizePoint {
    pub size: usize,
    pub per_gas_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

/// Train on deterministic prefixes of the training pool (the first 90% of
/// rows) and evaluate on the fixed held-out tail (the last 10%).
pub fn sweep_training_size(
    ds: &SpectraDataset,
    kind: &ModelKind,
    sizes: &[usize],
    lib: Option<&GasLibrary>,
    opts: &HarnessOptions,
) -> Result<Vec<SizePoint>> {
    check_library(core::slice::from_ref(kind), ds, lib)?;
    let n = ds.n_samples();
    let test_len = n.div_ceil(10);
    let pool = n - test_len;
    let mut prev = 0usize;
    for &s in sizes {
        if s <= prev {
            return Err(Error::invalid("sizes must be strictly ascending"));
        }
        if s > pool {
            return Err(Error::invalid(format!(
                "training size {s} exceeds the pool of {pool} samples"
            )));
        }
        prev = s;
    }
    let test_idx: Vec<usize> = (pool..n).collect();
    let test = ds.select_rows(&test_idx);
    let k = ds.n_gases();
    let mut out = Vec::with_capacity(sizes.len());
    for &size in sizes {
        let train_idx: Vec<usize> = (0..size).collect();
        let train = ds.select_rows(&train_idx);
        let model = fit_model(kind, &train, lib, opts, None)?;
        let pred = model.predict(&test.absorbances)?;
        let mut sse = vec![0.0f64; k];
        for i in 0..test.n_samples() {
            let p = pred.row(i);
            let t = test.concentrations.row(i);
            for g in 0..k {
                let d = p[g] - t[g];
                sse[g] += d * d;
            }
        }
        let per_gas_rmse: Vec<f64> = sse
            .iter()
            .map(|&s| math::sqrt(s / test.n_samples() as f64))
            .collect();
        out.push(SizePoint {
            size,
            mean_rmse: math::mean(&per_gas_rmse),
            per_gas_rmse,
        });
    }
    Ok(out)
}

/// One log-spaced concentration bin of the out-of-range study.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    /// Geometric bin center.
    pub center: f64,
    pub in_count: usize,
    pub out_count: usize,
    /// Median over folds of the per-fold median MAPE (NaN when empty).
    pub in_mape_median: f64,
    pub out_mape_median: f64,
    pub in_mape_mean: f64,
    pub out_mape_mean: f64,
    /// Sample std over folds of the per-fold median MAPE.
    pub in_fold_std: f64,
    pub out_fold_std: f64,
}

/// `MAPE(c) ~ max(gamma, a / c)` fitted to log-binned medians.
#[derive(Debug, Clone, PartialEq)]
pub struct SaturationFit {
    /// Plateau MAPE.
    pub gamma: f64,
    /// Knee concentration `a / gamma`.
    pub c_th: f64,
    /// Low-concentration branch amplitude.
    pub amplitude: f64,
    /// RMS residual of the fit over the used bins.
    pub residual: f64,
    /// Log-space RMS misfit of the full fitted curve (fit-quality measure
    /// independent of the plateau scale).
    pub log_rms: f64,
    /// Per-fold plateau fits (for variance bands).
    pub fold_gammas: Vec<f64>,
    /// Per-fold knee fits.
    pub fold_cths: Vec<f64>,
}

impl SaturationFit {
    /// Sample std over folds of the plateau fit.
    pub fn gamma_fold_std(&self) -> f64 {
        math::sqrt(math::sample_variance(&self.fold_gammas))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GasOutOfRange {
    pub gas: String,
    pub bins: Vec<BinStat>,
    pub saturation: SaturationFit,
    /// Bins with no out-of-range samples (skipped in the fit).
    pub skipped_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelOutOfRange {
    pub model: String,
    pub per_gas: Vec<GasOutOfRange>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutOfRangeStudy {
    pub models: Vec<ModelOutOfRange>,
    pub n_bins: usize,
    pub folds: usize,
}

/// Split-scan least squares for `m(c) ~ max(gamma, a/c)` on log-binned
/// medians. The split minimizes the total squared misfit in log space (both
/// branches span orders of magnitude); the reported residual is the RMS
/// deviation of the plateau bins from `gamma`, the quantity the plateau
/// quality is judged by.
fn fit_saturation(centers: &[f64], medians: &[f64]) -> (f64, f64, f64, f64) {
    let n = centers.len();
    if n == 0 {
        return (f64::NAN, f64::NAN, f64::NAN, f64::NAN);
    }
    let mut best = (f64::INFINITY, 0.0, 0.0, 0usize); // (log sse, gamma, a, split)
    for split in 1..n {
        // low bins [0, split): m ~ a / c ; high bins [split, n): m ~ gamma
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..split {
            num += medians[j] / centers[j];
            den += 1.0 / (centers[j] * centers[j]);
        }
        let a = if den > 0.0 { num / den } else { 0.0 };
        let mut gsum = 0.0;
        for j in split..n {
            gsum += medians[j];
        }
        let gamma = gsum / (n - split) as f64;
        if !(a > 0.0) || !(gamma > 0.0) {
            continue;
        }
        let mut sse = 0.0;
        for j in 0..n {
            let fit = if j < split { a / centers[j] } else { gamma };
            if medians[j] > 0.0 {
                let d = math::ln(medians[j] / fit);
                sse += d * d;
            }
        }
        if sse < best.0 {
            best = (sse, gamma, a, split);
        }
    }
    let (best_sse, gamma, a, split) = best;
    if !best_sse.is_finite() {
        // degenerate curve (all-zero medians): no plateau
        let gamma = medians.iter().sum::<f64>() / n as f64;
        return (gamma, 0.0, 0.0, 0.0);
    }
    let mut plat_sse = 0.0;
    for j in split..n {
        let d = medians[j] - gamma;
        plat_sse += d * d;
    }
    let residual = math::sqrt(plat_sse / (n - split) as f64);
    (gamma, a, residual, math::sqrt(best_sse / n as f64))
}

/// Train on the in-range dataset under a k-fold scheme, predict both the
/// held-out in-range split and the full out-of-range dataset, and bin MAPE
/// by true per-gas concentration (zeros excluded).
#[allow(clippy::too_many_arguments)]
pub fn out_of_range_study(
    train_ds: &SpectraDataset,
    test_ds: &SpectraDataset,
    kinds: &[ModelKind],
    lib: Option<&GasLibrary>,
    opts: &HarnessOptions,
    n_bins: usize,
    folds: usize,
    seed: u64,
) -> Result<OutOfRangeStudy> {
    check_library(kinds, train_ds, lib)?;
    if train_ds.library_fingerprint != test_ds.library_fingerprint
        || !crate::grid::same_grid(&train_ds.grid, &test_ds.grid)
        || train_ds.gas_names != test_ds.gas_names
    {
        return Err(Error::invalid(
            "in-range and out-of-range datasets must come from the same library",
        ));
    }
    if n_bins < 4 {
        return Err(Error::invalid("need at least 4 concentration bins"));
    }
    let k = train_ds.n_gases();
    // Shared log-spaced bin edges from the out-of-range population.
    let mut edges: Vec<Vec<f64>> = Vec::with_capacity(k);
    for g in 0..k {
        let col = test_ds.concentrations.col_copy(g);
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &v in &col {
            if v > 0.0 {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        if !(hi > lo) {
            return Err(Error::invalid(format!(
                "gas {g} has no positive out-of-range concentrations"
            )));
        }
        let llo = math::log10(lo);
        let lhi = math::log10(hi);
        let e: Vec<f64> = (0..=n_bins)
            .map(|j| math::powf(10.0, llo + (lhi - llo) * j as f64 / n_bins as f64))
            .collect();
        edges.push(e);
    }
    let bin_of = |g: usize, c: f64| -> Option<usize> {
        if c <= 0.0 {
            return None;
        }
        let e = &edges[g];
        if c < e[0] || c > e[n_bins] {
            return None;
        }
        let mut idx = 0;
        while idx + 1 < n_bins && c >= e[idx + 1] {
            idx += 1;
        }
        Some(idx)
    };

    let blocks = split_indices(train_ds.n_samples(), folds, seed)?;
    // per (kind, gas, bin, fold): collected MAPE values for in and out
    let mut models_out = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let mut in_vals: Vec<Vec<Vec<Vec<f64>>>> =
            vec![vec![vec![Vec::new(); folds]; n_bins]; k];
        let mut out_vals: Vec<Vec<Vec<Vec<f64>>>> =
            vec![vec![vec![Vec::new(); folds]; n_bins]; k];

        for (f, test_idx) in blocks.iter().enumerate() {
            let test_set: alloc::collections::BTreeSet<usize> =
                test_idx.iter().copied().collect();
            let train_idx: Vec<usize> = (0..train_ds.n_samples())
                .filter(|i| !test_set.contains(i))
                .collect();
            let train = train_ds.select_rows(&train_idx);
            let in_test = train_ds.select_rows(test_idx);
            let model = fit_model(kind, &train, lib, opts, None)?;
            for (ds, store) in [(&in_test, &mut in_vals), (test_ds, &mut out_vals)] {
                let pred = model.predict(&ds.absorbances)?;
                for i in 0..ds.n_samples() {
                    let t = ds.concentrations.row(i);
                    let p = pred.row(i);
                    for g in 0..k {
                        if let Some(bi) = bin_of(g, t[g]) {
                            store[g][bi][f].push(math::abs(p[g] - t[g]) / t[g]);
                        }
                    }
                }
            }
        }

        let mut per_gas = Vec::with_capacity(k);
        for g in 0..k {
            let mut bins = Vec::with_capacity(n_bins);
            let mut skipped = 0usize;
            let mut fit_centers = Vec::new();
            let mut fit_medians = Vec::new();
            for bi in 0..n_bins {
                let lo = edges[g][bi];
                let hi = edges[g][bi + 1];
                let center = math::sqrt(lo * hi);
                let gather = |store: &Vec<Vec<Vec<f64>>>| -> (usize, f64, f64, f64) {
                    let mut all: Vec<f64> = Vec::new();
                    let mut fold_medians: Vec<f64> = Vec::new();
                    for f in 0..folds {
                        let v = &store[bi][f];
                        if !v.is_empty() {
                            fold_medians.push(math::median(v));
                            all.extend_from_slice(v);
                        }
                    }
                    if all.is_empty() {
                        (0, f64::NAN, f64::NAN, f64::NAN)
                    } else {
                        let med = math::median(&fold_medians);
                        let std = math::sqrt(math::sample_variance(&fold_medians));
                        (all.len(), med, math::mean(&all), std)
                    }
                };
                let (in_count, in_med, in_mean, in_std) = gather(&in_vals[g]);
                let (out_count, out_med, out_mean, out_std) = gather(&out_vals[g]);
                if out_count == 0 {
                    skipped += 1;
                } else {
                    fit_centers.push(center);
                    fit_medians.push(out_med);
                }
                bins.push(BinStat {
                    lo,
                    hi,
                    center,
                    in_count,
                    out_count,
                    in_mape_median: in_med,
                    out_mape_median: out_med,
                    in_mape_mean: in_mean,
                    out_mape_mean: out_mean,
                    in_fold_std: in_std,
                    out_fold_std: out_std,
                });
            }
            let (gamma, amplitude, residual, log_rms) = fit_saturation(&fit_centers, &fit_medians);
            // per-fold fits for the variance bands
            let mut fold_gammas = Vec::new();
            let mut fold_cths = Vec::new();
            for f in 0..folds {
                let mut cs = Vec::new();
                let mut ms = Vec::new();
                for bi in 0..n_bins {
                    let v = &out_vals[g][bi][f];
                    if !v.is_empty() {
                        cs.push(math::sqrt(edges[g][bi] * edges[g][bi + 1]));
                        ms.push(math::median(v));
                    }
                }
                if cs.len() >= 2 {
                    let (gf, af, _, _) = fit_saturation(&cs, &ms);
                    if gf.is_finite() {
                        fold_gammas.push(gf);
                        fold_cths.push(if gf > 0.0 { af / gf } else { f64::INFINITY });
                    }
                }
            }
            per_gas.push(GasOutOfRange {
                gas: train_ds.gas_names[g].clone(),
                bins,
                saturation: SaturationFit {
                    gamma,
                    c_th: if gamma > 0.0 {
                        amplitude / gamma
                    } else {
                        f64::INFINITY
                    },
                    amplitude,
                    residual,
                    log_rms,
                    fold_gammas,
                    fold_cths,
                },
                skipped_bins: skipped,
            });
        }
        models_out.push(ModelOutOfRange {
            model: kind.name(),
            per_gas,
        });
    }
    Ok(OutOfRangeStudy {
        models: models_out,
        n_bins,
        folds,
    })
}
