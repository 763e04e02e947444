//! Command-line interface: the full pipeline as subcommands with
//! reproducible seeds and resolved-config provenance.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use specquant_core::eval::{
    evaluate_predictions, fit_model, kfold_evaluate, out_of_range_study, sweep_pc_count,
    sweep_training_size, HarnessOptions, ModelKind,
};
use specquant_core::gas::{synthesize_library, GasLibrary, LibraryProfile};
use specquant_core::pca::{explained_variance, fit_pca};
use specquant_core::quant::{estimate_system_noise, fit_tf, BMode, NoiseMode, RetainSpec};
use specquant_core::synth::{generate_dataset, GroupPreset, NoiseSpec, SpectraDataset};
use specquant_core::WavelengthGrid;

use crate::config::write_resolved_config;
use crate::export;
use crate::formats::basis::{parse_flavor, save_basis};
use crate::formats::dataset::{check_dataset_library, load_dataset, save_dataset};
use crate::formats::library::{load_library, save_library};
use crate::formats::model::{load_model, read_predictions_csv, save_model, write_predictions_csv};
use crate::formats::write_string;
use crate::report_json::{
    JsonEvalReport, JsonOutOfRange, JsonPcSweep, JsonSnrRow, JsonSnrSweep, JsonTrainSizeSweep,
    ReportJson,
};
use crate::{AppError, Result};

/// Synthesize, decompose and quantify multi-constituent absorption spectra.
#[derive(Parser, Debug)]
#[command(name = "specquant", version, about)]
pub struct Cli {
    /// Worker threads (defaults to SPECQUANT_THREADS or all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Synthesize the default nine-gas extinction library.
    GenLibrary(GenLibraryArgs),
    /// Generate a mixture dataset from a library.
    GenDataset(GenDatasetArgs),
    /// Fit a principal-component basis to a dataset.
    FitPca(FitPcaArgs),
    /// Train a quantification model on a dataset.
    Fit(FitArgs),
    /// Predict concentrations with a saved model.
    Predict(PredictArgs),
    /// K-fold evaluation of a model (or external predictions).
    Evaluate(EvaluateArgs),
    /// Component-count, noise-level and training-size sweeps.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Out-of-range study: train in-range, bin MAPE against concentration.
    OutOfRange(OutOfRangeArgs),
    /// Estimate system noise from samples with known concentrations.
    NoiseEstimate(NoiseEstimateArgs),
    /// Re-render the CSV bundle from a saved report.json.
    Export(ExportArgs),
}

#[derive(Args, Debug)]
pub struct GenLibraryArgs {
    /// RNG seed for the line placement.
    #[arg(long)]
    pub seed: u64,
    /// Output directory for extinction.csv and library.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of wavelength grid points.
    #[arg(long, default_value_t = 1000)]
    pub grid_points: usize,
    /// Lower edge of the wavelength window, micrometres.
    #[arg(long, default_value_t = 2.5)]
    pub grid_min: f64,
    /// Upper edge of the wavelength window, micrometres.
    #[arg(long, default_value_t = 14.0)]
    pub grid_max: f64,
}

#[derive(Args, Debug)]
pub struct GenDatasetArgs {
    /// Concentration preset: 1 (uniform), 2 or 3 (log-uniform, half presence).
    #[arg(long)]
    pub group: u8,
    /// Source signal-to-noise ratio in dB; omit for a noiseless dataset.
    #[arg(long)]
    pub snr_db: Option<f64>,
    /// Number of samples.
    #[arg(long)]
    pub n: usize,
    /// RNG seed for concentrations and noise.
    #[arg(long)]
    pub seed: u64,
    /// Library directory (gen-library output).
    #[arg(long)]
    pub library: PathBuf,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// Optical path length in cm.
    #[arg(long, default_value_t = 1.0)]
    pub path_length: f64,
}

#[derive(Args, Debug, Clone)]
pub struct DecompositionArgs {
    /// Decomposition flavor: fpca (trapezoidal weighting) or pca.
    #[arg(long, default_value = "fpca")]
    pub flavor: String,
    /// Skip mean subtraction (zero mean function).
    #[arg(long)]
    pub uncentered: bool,
}

impl DecompositionArgs {
    fn harness(&self) -> Result<HarnessOptions> {
        Ok(HarnessOptions {
            flavor: parse_flavor(&self.flavor)?,
            centered: !self.uncentered,
        })
    }
}

#[derive(Args, Debug)]
pub struct FitPcaArgs {
    /// Input dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Number of components to retain.
    #[arg(long)]
    pub components: usize,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory for basis.csv and basis.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Model type: lr, direct, tf, plsr or mean.
    #[arg(long)]
    pub model: String,
    /// Component count (required for lr, direct and plsr).
    #[arg(long)]
    pub components: Option<usize>,
    /// Leading weight entries kept per gas (direct model).
    #[arg(long)]
    pub retain: Option<usize>,
    /// Learn the path length from calibration samples (tf).
    #[arg(long)]
    pub learn_b: bool,
    /// Learn the noise projections from calibration samples (tf).
    #[arg(long)]
    pub learn_noise: bool,
    /// Calibration sample count for tf; 0 means the whole training split.
    #[arg(long, default_value_t = 0)]
    pub calibration: usize,
}

impl ModelArgs {
    fn kind(&self) -> Result<ModelKind> {
        let need_components = || {
            self.components.ok_or_else(|| {
                AppError::Usage(format!("--components is required for model {}", self.model))
            })
        };
        match self.model.as_str() {
            "lr" => Ok(ModelKind::Lr {
                components: need_components()?,
            }),
            "direct" => Ok(ModelKind::Direct {
                components: need_components()?,
                retain: RetainSpec::Global(self.retain.ok_or_else(|| {
                    AppError::Usage("--retain is required for the direct model".into())
                })?),
            }),
            "tf" => Ok(ModelKind::Tf {
                learn_b: self.learn_b,
                learn_noise: self.learn_noise,
                calibration: self.calibration,
            }),
            "plsr" => Ok(ModelKind::Plsr {
               components: need_components()?,
            }),
            "mean" => Ok(ModelKind::Mean),
            other => Err(AppError::Usage(format!(
                "unknown model {other:?} (expected lr, direct, tf, plsr or mean)"
            ))),
        }
    }

    fn to_json(&self) -> serde_json::Value {
        json!({
            "model": self.model,
            "components": self.components,
            "retain": self.retain,
            "learn_b": self.learn_b,
            "learn_noise": self.learn_noise,
            "calibration": self.calibration,
        })
    }
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Training dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Library directory (required for tf).
    #[arg(long)]
    pub library: Option<PathBuf>,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output model directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Saved model directory (fit output).
    #[arg(long)]
    pub model_dir: PathBuf,
    /// Dataset whose spectra are predicted.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output CSV of predicted concentrations.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Dataset file to evaluate on.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Library directory (required for tf).
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// External predictions CSV (bypasses model training).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Seed for the fold shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory for report.json and the CSV bundle.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand, Debug)]
pub enum SweepCommand {
    /// RMSE vs number of retained components.
    Pcs(SweepPcsArgs),
    /// Evaluate one model across datasets at different noise levels.
    Snr(SweepSnrArgs),
    /// RMSE vs number of training samples (deterministic prefixes).
    TrainSize(SweepTrainSizeArgs),
}

#[derive(Args, Debug)]
pub struct SweepPcsArgs {
    /// Dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Largest component count to evaluate.
    #[arg(long)]
    pub max_components: usize,
    /// Seed for the train/test split.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepSnrArgs {
    /// Comma-separated dataset files (one per noise level).
    #[arg(long, value_delimiter = ',')]
    pub datasets: Vec<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Library directory (required for tf).
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Seed for the fold shuffles.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepTrainSizeArgs {
    /// Dataset file.
    #[arg(long)]
    pub dataset: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Library directory (required for tf).
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Comma-separated ascending training sizes.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Vec<usize>,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OutOfRangeArgs {
    /// In-range training dataset.
    #[arg(long)]
    pub train: PathBuf,
    /// Dataset containing out-of-range concentrations.
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated model types (lr, tf, plsr, mean).
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<String>,
    /// Component count for lr/plsr entries.
    #[arg(long)]
    pub components: Option<usize>,
    /// Calibration sample count for tf entries (0 = whole split).
    #[arg(long, default_value_t = 0)]
    pub calibration: usize,
    /// Library directory (required for tf).
    #[arg(long)]
    pub library: Option<PathBuf>,
    /// Number of log-spaced concentration bins.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Number of cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Seed for the fold shuffle.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NoiseEstimateArgs {
    /// Library directory.
    #[arg(long)]
    pub library: PathBuf,
    /// Dataset with known concentrations.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Override the path length recorded in the dataset, cm.
    #[arg(long)]
    pub path_length: Option<f64>,
    #[command(flatten)]
    pub decomposition: DecompositionArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Saved report.json from evaluate/sweep/out-of-range.
    #[arg(long)]
    pub report: PathBuf,
    /// Output directory for the CSV bundle.
    #[arg(long)]
    pub out: PathBuf,
}

fn resolve_threads(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| {
            std::env::var("SPECQUANT_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn load_library_arg(path: Option<&PathBuf>, needed: bool) -> Result<Option<GasLibrary>> {
    match path {
        Some(p) => Ok(Some(load_library(p)?)),
        None if needed => Err(AppError::Usage(
            "--library is required for the training-free model".into(),
        )),
        None => Ok(None),
    }
}

fn snr_of(ds: &SpectraDataset) -> Option<f64> {
    ds.noise.map(|n| n.snr_db())
}

/// Run the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let threads = resolve_threads(cli.threads);
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global();
    match dispatch(cli.command, threads) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ERROR[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

fn dispatch(command: Command, threads: usize) -> Result<()> {
    match command {
        Command::GenLibrary(args) => gen_library(args, threads),
        Command::GenDataset(args) => gen_dataset(args, threads),
        Command::FitPca(args) => fit_pca_cmd(args, threads),
        Command::Fit(args) => fit_cmd(args, threads),
        Command::Predict(args) => predict_cmd(args, threads),
        Command::Evaluate(args) => evaluate_cmd(args, threads),
        Command::Sweep(SweepCommand::Pcs(args)) => sweep_pcs_cmd(args, threads),
        Command::Sweep(SweepCommand::Snr(args)) => sweep_snr_cmd(args, threads),
        Command::Sweep(SweepCommand::TrainSize(args)) => sweep_train_size_cmd(args, threads),
        Command::OutOfRange(args) => out_of_range_cmd(args, threads),
        Command::NoiseEstimate(args) => noise_estimate_cmd(args, threads),
        Command::Export(args) => export_cmd(args, threads),
    }
}

fn gen_library(args: GenLibraryArgs, threads: usize) -> Result<()> {
    let grid = WavelengthGrid::uniform(args.grid_min, args.grid_max, args.grid_points)?;
    let lib = synthesize_library(args.seed, &grid, &LibraryProfile::DefaultNineGas)?;
    save_library(&args.out, &lib)?;
    write_resolved_config(
        &args.out,
        true,
        "gen-library",
        threads,
        json!({
            "seed": args.seed,
            "grid_points": args.grid_points,
            "grid_min_um": args.grid_min,
            "grid_max_um": args.grid_max,
            "fingerprint": format!("{:016x}", lib.fingerprint()),
        }),
    )?;
    println!(
        "library: {} gases on {} grid points -> {}",
        lib.len(),
        grid.len(),
        args.out.display()
    );
    Ok(())
}

fn group_preset(group: u8) -> Result<GroupPreset> {
    match group {
        1 => Ok(GroupPreset::I),
        2 => Ok(GroupPreset::II),
        3 => Ok(GroupPreset::III),
        other => Err(AppError::Usage(format!(
            "unknown group {other} (expected 1, 2 or 3)"
        ))),
    }
}

fn gen_dataset(args: GenDatasetArgs, threads: usize) -> Result<()> {
    let lib = load_library(&args.library)?;
    let preset = group_preset(args.group)?;
    let noise = match args.snr_db {
        Some(snr) => Some(NoiseSpec::from_snr_db(snr)?),
        None => None,
    };
    let ds = generate_dataset(
        &lib,
        &preset.scheme(),
        args.n,
        args.path_length,
        noise,
        args.seed,
    )?;
    save_dataset(&args.out, &ds)?;
    write_resolved_config(
        &args.out,
        false,
        "gen-dataset",
        threads,
        json!({
            "group": args.group,
            "snr_db": args.snr_db,
            "n": args.n,
            "seed": args.seed,
            "library": args.library,
            "path_length_cm": args.path_length,
            "library_fingerprint": format!("{:016x}", ds.library_fingerprint),
        }),
    )?;
    println!(
        "dataset: {} samples x {} wavelengths -> {}",
        ds.n_samples(),
        ds.n_wavelengths(),
        args.out.display()
    );
    Ok(())
}

fn fit_pca_cmd(args: FitPcaArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let opts = args.decomposition.harness()?;
    let basis = fit_pca(
        &ds.absorbances,
        &ds.grid,
        opts.flavor,
        opts.centered,
        args.components,
    )?;
    save_basis(&args.out, &basis)?;
    let (iev, cev) = explained_variance(&basis, basis.len())?;
    let mut ev = String::from("component,eigenvalue,iev,cev\n");
    for l in 0..basis.len() {
        ev.push_str(&format!(
            "{},{},{},{}\n",
            l + 1,
            basis.eigenvalues()[l],
            iev[l],
            cev[l]
        ));
    }
    write_string(&args.out.join("explained_variance.csv"), &ev)?;
    write_resolved_config(
        &args.out,
        true,
        "fit-pca",
        threads,
        json!({
            "dataset": args.dataset,
            "components": args.components,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
            "effective_rank": basis.effective_rank(),
        }),
    )?;
    println!(
        "basis: {} components (effective rank {}) -> {}",
        basis.len(),
        basis.effective_rank(),
        args.out.display()
    );
    Ok(())
}

fn fit_cmd(args: FitArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let kind = args.model.kind()?;
    let needs_lib = matches!(kind, ModelKind::Tf { .. });
    let lib = load_library_arg(args.library.as_ref(), needs_lib)?;
    if let Some(lib) = &lib {
        check_dataset_library(&ds, lib)?;
    }
    let opts = args.decomposition.harness()?;
    let model = fit_model(&kind, &ds, lib.as_ref(), &opts, None)?;
    save_model(&args.out, &model)?;
    write_resolved_config(
        &args.out,
        true,
        "fit",
        threads,
        json!({
            "dataset": args.dataset,
            "library": args.library,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
            "model": args.model.to_json(),
        }),
    )?;
    println!("model {} -> {}", kind.name(), args.out.display());
    Ok(())
}

fn predict_cmd(args: PredictArgs, threads: usize) -> Result<()> {
    let model = load_model(&args.model_dir)?;
    let ds = load_dataset(&args.dataset)?;
    let pred = model.predict(&ds.absorbances)?;
    write_predictions_csv(&args.out, &ds.gas_names, &pred)?;
    write_resolved_config(
        &args.out,
        false,
        "predict",
        threads,
        json!({
            "model_dir": args.model_dir,
            "dataset": args.dataset,
        }),
    )?;
    println!("{} predictions -> {}", pred.rows(), args.out.display());
    Ok(())
}

fn evaluate_cmd(args: EvaluateArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let report = if let Some(pred_path) = &args.predictions {
        let pred = read_predictions_csv(pred_path, &ds.gas_names)?;
        evaluate_predictions(&pred, &ds, "external")?
    } else {
        let kind = args.model.kind()?;
        let needs_lib = matches!(kind, ModelKind::Tf { .. });
        let lib = load_library_arg(args.library.as_ref(), needs_lib)?;
        let opts = args.decomposition.harness()?;
        kfold_evaluate(&kind, &ds, lib.as_ref(), &opts, args.folds, args.seed)?
    };
    let bundle = ReportJson::Eval {
        reports: vec![JsonEvalReport::from(&report)],
    };
    export::write_report_json(&args.out, &bundle)?;
    export::export_report(&args.out, &bundle)?;
    write_resolved_config(
        &args.out,
        true,
        "evaluate",
        threads,
        json!({
            "dataset": args.dataset,
            "library": args.library,
            "predictions": args.predictions,
            "folds": args.folds,
            "seed": args.seed,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
            "model": args.model.to_json(),
        }),
    )?;
    println!(
        "{}: mean RMSE {:.6e} M over {} folds -> {}",
        report.model,
        report.mean_rmse,
        report.fold_count,
        args.out.display()
    );
    Ok(())
}

fn sweep_pcs_cmd(args: SweepPcsArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let opts = args.decomposition.harness()?;
    let sweep = sweep_pc_count(&ds, &opts, args.max_components, args.seed)?;
    let bundle = ReportJson::PcSweep(JsonPcSweep::new("lr", &sweep));
    export::write_report_json(&args.out, &bundle)?;
    export::export_report(&args.out, &bundle)?;
    write_resolved_config(
        &args.out,
        true,
        "sweep-pcs",
        threads,
        json!({
            "dataset": args.dataset,
            "max_components": args.max_components,
            "seed": args.seed,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
        }),
    )?;
    println!(
        "pc sweep over l = 0..={} -> {}",
        sweep.ls.last().copied().unwrap_or(0),
        args.out.display()
    );
    Ok(())
}

fn sweep_snr_cmd(args: SweepSnrArgs, threads: usize) -> Result<()> {
    if args.datasets.is_empty() {
        return Err(AppError::Usage("--datasets must list at least one file".into()));
    }
    let kind = args.model.kind()?;
    let needs_lib = matches!(kind, ModelKind::Tf { .. });
    let lib = load_library_arg(args.library.as_ref(), needs_lib)?;
    let opts = args.decomposition.harness()?;
    let mut rows = Vec::new();
    let mut gas_names: Option<Vec<String>> = None;
    for path in &args.datasets {
        let ds = load_dataset(path)?;
        if let Some(names) = &gas_names {
            if *names != ds.gas_names {
                return Err(AppError::Usage(format!(
                    "dataset {} has different gas names",
                    path.display()
                )));
            }
        } else {
            gas_names = Some(ds.gas_names.clone());
        }
        let report = kfold_evaluate(&kind, &ds, lib.as_ref(), &opts, args.folds, args.seed)?;
        rows.push(JsonSnrRow {
            dataset: path.display().to_string(),
            snr_db: snr_of(&ds),
            model: report.model.clone(),
            per_gas_rmse: report.per_gas_rmse.clone(),
            mean_rmse: report.mean_rmse,
        });
    }
    let bundle = ReportJson::SnrSweep(JsonSnrSweep {
        gas_names: gas_names.unwrap_or_default(),
        rows,
    });
    export::write_report_json(&args.out, &bundle)?;
    export::export_report(&args.out, &bundle)?;
    write_resolved_config(
        &args.out,
        true,
        "sweep-snr",
        threads,
        json!({
            "datasets": args.datasets,
            "library": args.library,
            "folds": args.folds,
            "seed": args.seed,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
            "model": args.model.to_json(),
        }),
    )?;
    println!("snr sweep over {} datasets -> {}", args.datasets.len(), args.out.display());
    Ok(())
}

fn sweep_train_size_cmd(args: SweepTrainSizeArgs, threads: usize) -> Result<()> {
    let ds = load_dataset(&args.dataset)?;
    let kind = args.model.kind()?;
    let needs_lib = matches!(kind, ModelKind::Tf { .. });
    let lib = load_library_arg(args.library.as_ref(), needs_lib)?;
    if let Some(lib) = &lib {
        check_dataset_library(&ds, lib)?;
    }
    let opts = args.decomposition.harness()?;
    let points = sweep_training_size(&ds, &kind, &args.sizes, lib.as_ref(), &opts)?;
    let bundle = ReportJson::TrainSize {
        sweeps: vec![JsonTrainSizeSweep::new(&kind.name(), &ds.gas_names, &points)],
    };
    export::write_report_json(&args.out, &bundle)?;
    export::export_report(&args.out, &bundle)?;
    write_resolved_config(
        &args.out,
        true,
        "sweep-train-size",
        threads,
        json!({
            "dataset": args.dataset,
            "library": args.library,
            "sizes": args.sizes,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
            "model": args.model.to_json(),
        }),
    )?;
    println!("train-size sweep over {} sizes -> {}", args.sizes.len(), args.out.display());
    Ok(())
}

fn out_of_range_cmd(args: OutOfRangeArgs, threads: usize) -> Result<()> {
    let train = load_dataset(&args.train)?;
    let test = load_dataset(&args.test)?;
    let mut kinds = Vec::new();
    for token in &args.models {
        let kind = match token.as_str() {
            "lr" => ModelKind::Lr {
                components: args.components.ok_or_else(|| {
                    AppError::Usage("--components is required for lr entries".into())
                })?,
            },
            "plsr" => ModelKind::Plsr {
                components: args.components.ok_or_else(|| {
                    AppError::Usage("--components is required for plsr entries".into())
                })?,
            },
            "tf" => ModelKind::Tf {
                learn_b: true,
                learn_noise: true,
                calibration: args.calibration,
            },
            "mean" => ModelKind::Mean,
            other => {
                return Err(AppError::Usage(format!(
                    "unknown model {other:?} in --models"
                )))
            }
        };
        kinds.push(kind);
    }
    let needs_lib = kinds.iter().any(|k| matches!(k, ModelKind::Tf { .. }));
    let lib = load_library_arg(args.library.as_ref(), needs_lib)?;
    let opts = args.decomposition.harness()?;
    let study = out_of_range_study(
        &train,
        &test,
        &kinds,
        lib.as_ref(),
        &opts,
        args.bins,
        args.folds,
        args.seed,
    )?;
    let bundle = ReportJson::OutOfRange(JsonOutOfRange::from(&study));
    export::write_report_json(&args.out, &bundle)?;
    export::export_report(&args.out, &bundle)?;
    write_resolved_config(
        &args.out,
        true,
        "out-of-range",
        threads,
        json!({
            "train": args.train,
            "test": args.test,
            "models": args.models,
            "components": args.components,
            "calibration": args.calibration,
            "library": args.library,
            "bins": args.bins,
            "folds": args.folds,
            "seed": args.seed,
            "flavor": args.decomposition.flavor,
            "centered": !args.decomposition.uncentered,
        }),
    )?;
    println!(
        "out-of-range study: {} models x {} bins -> {}",
        study.models.len(),
        study.n_bins,
        args.out.display()
    );
    Ok(())
}

fn noise_estimate_cmd(args: NoiseEstimateArgs, threads: usize) -> Result<()> {
    let lib = load_library(&args.library)?;
    let ds = load_dataset(&args.dataset)?;
    check_dataset_library(&ds, &lib)?;
    let opts = args.decomposition.harness()?;
    let b = args.path_length.unwrap_or(ds.path_length_cm);
    let model = fit_tf(&lib, opts.flavor, false, BMode::Known(b), NoiseMode::Zero, None)?;
    let est = estimate_system_noise(&model, &ds)?;
    let per_sample: Vec<f64> = (0..est.noise.rows())
        .map(|i| {
            let row = est.noise.row(i);
            row.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    let doc = json!({
        "mean_power": est.mean_power,
        "n_samples": est.noise.rows(),
        "path_length_cm": b,
        "per_sample_power": per_sample,
    });
    write_string(
        &args.out.join("noise_power.json"),
        &serde_json::to_string_pretty(&doc).expect("doc serializes"),
    )?;
    write_resolved_config(
        &args.out,
        true,
        "noise-estimate",
        threads,
        json!({
            "library": args.library,
            "dataset": args.dataset,
            "path_length_cm": b,
            "flavor": args.decomposition.flavor,
        }),
    )?;
    println!(
        "mean noise power {:.6e} over {} samples -> {}",
        est.mean_power,
        est.noise.rows(),
        args.out.display()
    );
    Ok(())
}

fn export_cmd(args: ExportArgs, threads: usize) -> Result<()> {
    let text = crate::formats::read_to_string(&args.report)?;
    let report: ReportJson = serde_json::from_str(&text).map_err(|e| AppError::Schema {
        path: args.report.clone(),
        msg: e.to_string(),
    })?;
    export::export_report(&args.out, &report)?;
    write_resolved_config(
        &args.out,
        true,
        "export",
        threads,
        json!({ "report": args.report }),
    )?;
    println!("export -> {}", args.out.display());
    Ok(())
}
