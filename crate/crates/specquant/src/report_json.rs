//! Serializable mirrors of the evaluation structures.
//!
//! JSON cannot carry NaN or infinities, so any value that may be non-finite
//! (empty-bin medians, saturated knees) is stored as an option; `None` maps
//! back to NaN on the reading side.

use serde::{Deserialize, Serialize};
use specquant_core::eval::{
    EvalReport, GasOutOfRange, ModelOutOfRange, OutOfRangeStudy, PcCountSweep, SizePoint,
};

fn opt(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonFold {
    pub per_gas_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub n_test: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonEvalReport {
    pub model: String,
    pub dataset: String,
    pub gas_names: Vec<String>,
    pub fold_count: usize,
    pub per_gas_rmse: Vec<f64>,
    pub mean_rmse: f64,
    pub per_gas_mape: Vec<Option<f64>>,
    pub mape_excluded_zeros: Vec<usize>,
    pub random_guess_rmse: Vec<f64>,
    pub folds: Vec<JsonFold>,
}

impl From<&EvalReport> for JsonEvalReport {
    fn from(r: &EvalReport) -> Self {
        JsonEvalReport {
            model: r.model.clone(),
            dataset: r.dataset.clone(),
            gas_names: r.gas_names.clone(),
            fold_count: r.fold_count,
            per_gas_rmse: r.per_gas_rmse.clone(),
            mean_rmse: r.mean_rmse,
            per_gas_mape: r.per_gas_mape.iter().map(|&v| opt(v)).collect(),
            mape_excluded_zeros: r.mape_excluded_zeros.clone(),
            random_guess_rmse: r.random_guess_rmse.clone(),
            folds: r
                .folds
                .iter()
                .map(|f| JsonFold {
                    per_gas_rmse: f.per_gas_rmse.clone(),
                    mean_rmse: f.mean_rmse,
                    n_test: f.n_test,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonPcSweep {
    pub model: String,
    pub gas_names: Vec<String>,
    pub ls: Vec<usize>,
    /// Row per entry of `ls`, one column per gas.
    pub rmse: Vec<Vec<f64>>,
    /// Row per component count >= 1.
    pub delta: Vec<Vec<f64>>,
}

impl JsonPcSweep {
    pub fn new(model: &str, s: &PcCountSweep) -> Self {
        let rows = |m: &specquant_core::Mat| -> Vec<Vec<f64>> {
            (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
        };
        JsonPcSweep {
            model: model.into(),
            gas_names: s.gas_names.clone(),
            ls: s.ls.clone(),
            rmse: rows(&s.rmse),
            delta: rows(&s.delta),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonSizePoint {
    pub size: usize,
    pub per_gas_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonTrainSizeSweep {
    pub model: String,
    pub gas_names: Vec<String>,
    pub points: Vec<JsonSizePoint>,
}

impl JsonTrainSizeSweep {
    pub fn new(model: &str, gas_names: &[String], points: &[SizePoint]) -> Self {
        JsonTrainSizeSweep {
            model: model.into(),
            gas_names: gas_names.to_vec(),
            points: points
                .iter()
                .map(|p| JsonSizePoint {
                    size: p.size,
                    per_gas_rmse: p.per_gas_rmse.clone(),
                    mean_rmse: p.mean_rmse,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonSnrRow {
    pub dataset: String,
    pub snr_db: Option<f64>,
    pub model: String,
    pub per_gas_rmse: Vec<f64>,
    pub mean_rmse: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonSnrSweep {
    pub gas_names: Vec<String>,
    pub rows: Vec<JsonSnrRow>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub in_count: usize,
    pub out_count: usize,
    pub in_mape_median: Option<f64>,
    pub out_mape_median: Option<f64>,
    pub in_mape_mean: Option<f64>,
    pub out_mape_mean: Option<f64>,
    pub in_fold_std: Option<f64>,
    pub out_fold_std: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonSaturation {
    pub gamma: Option<f64>,
    pub c_th: Option<f64>,
    pub amplitude: Option<f64>,
    pub residual: Option<f64>,
    #[serde(default)]
    pub log_rms: Option<f64>,
    pub fold_gammas: Vec<f64>,
    pub fold_cths: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonGasOutOfRange {
    pub gas: String,
    pub bins: Vec<JsonBin>,
    pub saturation: JsonSaturation,
    pub skipped_bins: usize,
}

impl From<&GasOutOfRange> for JsonGasOutOfRange {
    fn from(g: &GasOutOfRange) -> Self {
        JsonGasOutOfRange {
            gas: g.gas.clone(),
            bins: g
                .bins
                .iter()
                .map(|b| JsonBin {
                    lo: b.lo,
                    hi: b.hi,
                    center: b.center,
                    in_count: b.in_count,
                    out_count: b.out_count,
                    in_mape_median: opt(b.in_mape_median),
                    out_mape_median: opt(b.out_mape_median),
                    in_mape_mean: opt(b.in_mape_mean),
                    out_mape_mean: opt(b.out_mape_mean),
                    in_fold_std: opt(b.in_fold_std),
                    out_fold_std: opt(b.out_fold_std),
                })
                .collect(),
            saturation: JsonSaturation {
                gamma: opt(g.saturation.gamma),
                c_th: opt(g.saturation.c_th),
                amplitude: opt(g.saturation.amplitude),
                residual: opt(g.saturation.residual),
                log_rms: opt(g.saturation.log_rms),
                fold_gammas: g.saturation.fold_gammas.clone(),
                fold_cths: g.saturation.fold_cths.iter().map(|&v| opt(v)).collect(),
            },
            skipped_bins: g.skipped_bins,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonModelOutOfRange {
    pub model: String,
    pub per_gas: Vec<JsonGasOutOfRange>,
}

impl From<&ModelOutOfRange> for JsonModelOutOfRange {
    fn from(m: &ModelOutOfRange) -> Self {
        JsonModelOutOfRange {
            model: m.model.clone(),
            per_gas: m.per_gas.iter().map(JsonGasOutOfRange::from).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonOutOfRange {
    pub models: Vec<JsonModelOutOfRange>,
    pub n_bins: usize,
    pub folds: usize,
}

impl From<&OutOfRangeStudy> for JsonOutOfRange {
    fn from(s: &OutOfRangeStudy) -> Self {
        JsonOutOfRange {
            models: s.models.iter().map(JsonModelOutOfRange::from).collect(),
            n_bins: s.n_bins,
            folds: s.folds,
        }
    }
}

/// Tagged container persisted as `report.json`; the `export` subcommand
/// re-renders the CSV bundle from it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ReportJson {
    #[serde(rename = "eval")]
    Eval { reports: Vec<JsonEvalReport> },
    #[serde(rename = "pc-sweep")]
    PcSweep(JsonPcSweep),
    #[serde(rename = "train-size")]
    TrainSize { sweeps: Vec<JsonTrainSizeSweep> },
    #[serde(rename = "snr-sweep")]
    SnrSweep(JsonSnrSweep),
    #[serde(rename = "out-of-range")]
    OutOfRange(JsonOutOfRange),
}
