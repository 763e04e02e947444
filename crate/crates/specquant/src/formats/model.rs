//! Model directories: `model.json` metadata plus CSV matrices, with the
//! model's basis stored in a `basis/` subdirectory where applicable.

use std::path::Path;

use serde::{Deserialize, Serialize};
use specquant_core::eval::TrainedQuantifier;
use specquant_core::quant::{DirectModel, LrModel, PlsrModel, TfModel};
use specquant_core::Mat;

use super::basis::{load_basis, save_basis};
use super::{read_matrix_csv, read_to_string, write_matrix_csv, write_string};
use crate::{AppError, Result};

pub const MODEL_JSON: &str = "model.json";

#[derive(Debug, Serialize, Deserialize)]
struct ModelMeta {
    format_version: u32,
    model_type: String,
    gas_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kappa: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    in_sample_rmse: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    retain_counts: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_norms: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b_cm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_prime: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    condition: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mean_appended: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_components: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_mean: Option<Vec<f64>>,
}

impl ModelMeta {
    fn new(model_type: &str, gas_names: Vec<String>) -> Self {
        ModelMeta {
            format_version: 1,
            model_type: model_type.into(),
            gas_names,
            kappa: None,
            in_sample_rmse: None,
            retain_counts: None,
            eps_norms: None,
            b_cm: None,
            n_prime: None,
            condition: None,
            mean_appended: None,
            n_components: None,
            x_mean: None,
            y_mean: None,
        }
    }
}

pub fn save_model(dir: &Path, model: &TrainedQuantifier) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let meta = match model {
        TrainedQuantifier::Lr(m) => {
            save_basis(&dir.join("basis"), m.basis())?;
            write_matrix_csv(&dir.join("lambda.csv"), m.lambda())?;
            let mut meta = ModelMeta::new("lr", m.gas_names().to_vec());
            meta.kappa = Some(m.kappa().to_vec());
            meta.in_sample_rmse = Some(m.in_sample_rmse().to_vec());
            meta
        }
        TrainedQuantifier::Direct(m) => {
            save_basis(&dir.join("basis"), m.basis())?;
            write_matrix_csv(&dir.join("lambda_sparse.csv"), m.lambda_sparse())?;
            let mut meta = ModelMeta::new("direct", m.gas_names().to_vec());
            meta.kappa = Some(m.kappa().to_vec());
            meta.retain_counts = Some(m.retain_counts().to_vec());
            meta
        }
        TrainedQuantifier::Tf(m) => {
            save_basis(&dir.join("basis"), m.basis())?;
            write_matrix_csv(&dir.join("beta_prime_t.csv"), m.beta_prime_t())?;
            write_matrix_csv(&dir.join("shape_scores.csv"), m.shape_scores())?;
            let mut meta = ModelMeta::new("tf", m.gas_names().to_vec());
            meta.eps_norms = Some(m.eps_norms().to_vec());
            meta.b_cm = Some(m.b());
            meta.n_prime = Some(m.n_prime().to_vec());
            meta.condition = Some(m.condition());
            meta.mean_appended = Some(m.mean_appended());
            meta
        }
        TrainedQuantifier::Plsr(m) => {
            write_matrix_csv(&dir.join("x_weights.csv"), m.x_weights())?;
            write_matrix_csv(&dir.join("x_loadings.csv"), m.x_loadings())?;
            write_matrix_csv(&dir.join("y_loadings.csv"), m.y_loadings())?;
            write_matrix_csv(&dir.join("x_scores.csv"), m.x_scores())?;
            write_matrix_csv(&dir.join("coefficients.csv"), m.coefficients())?;
            let mut meta = ModelMeta::new("plsr", Vec::new());
            meta.n_components = Some(m.n_components());
            meta.x_mean = Some(m.x_mean().to_vec());
            meta.y_mean = Some(m.y_mean().to_vec());
            meta
        }
        TrainedQuantifier::Mean(mu) => {
            let mut meta = ModelMeta::new("mean", Vec::new());
            meta.kappa = Some(mu.clone());
            meta
        }
    };
    let json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    write_string(&dir.join(MODEL_JSON), &json)
}

fn missing(dir: &Path, what: &str) -> AppError {
    AppError::Schema {
        path: dir.join(MODEL_JSON),
        msg: format!("missing field {what}"),
    }
}

pub fn load_model(dir: &Path) -> Result<TrainedQuantifier> {
    let json_path = dir.join(MODEL_JSON);
    let meta: ModelMeta =
        serde_json::from_str(&read_to_string(&json_path)?).map_err(|e| AppError::Schema {
            path: json_path.clone(),
            msg: e.to_string(),
        })?;
    if meta.format_version != 1 {
        return Err(AppError::Version {
            path: json_path,
            expected: 1,
            got: meta.format_version,
        });
    }
    match meta.model_type.as_str() {
        "lr" => {
            let basis = load_basis(&dir.join("basis"))?;
            let lambda = read_matrix_csv(&dir.join("lambda.csv"))?;
            let kappa = meta.kappa.ok_or_else(|| missing(dir, "kappa"))?;
            let rmse = meta
                .in_sample_rmse
                .ok_or_else(|| missing(dir, "in_sample_rmse"))?;
            Ok(TrainedQuantifier::Lr(LrModel::from_parts(
                basis,
                meta.gas_names,
                lambda,
                kappa,
                rmse,
            )?))
        }
        "direct" => {
            let basis = load_basis(&dir.join("basis"))?;
            let lambda = read_matrix_csv(&dir.join("lambda_sparse.csv"))?;
            let kappa = meta.kappa.ok_or_else(|| missing(dir, "kappa"))?;
            let retain = meta
                .retain_counts
                .ok_or_else(|| missing(dir, "retain_counts"))?;
            Ok(TrainedQuantifier::Direct(DirectModel::from_parts(
                basis,
                meta.gas_names,
                lambda,
                kappa,
                retain,
            )?))
        }
        "tf" => {
            let basis = load_basis(&dir.join("basis"))?;
            let bpt = read_matrix_csv(&dir.join("beta_prime_t.csv"))?;
            let shape_scores = read_matrix_csv(&dir.join("shape_scores.csv"))?;
            Ok(TrainedQuantifier::Tf(TfModel::from_parts(
                basis,
                meta.mean_appended.ok_or_else(|| missing(dir, "mean_appended"))?,
                meta.gas_names,
                meta.eps_norms.ok_or_else(|| missing(dir, "eps_norms"))?,
                bpt,
                shape_scores,
                meta.b_cm.ok_or_else(|| missing(dir, "b_cm"))?,
                meta.n_prime.ok_or_else(|| missing(dir, "n_prime"))?,
                meta.condition.ok_or_else(|| missing(dir, "condition"))?,
            )?))
        }
        "plsr" => {
            let x_weights = read_matrix_csv(&dir.join("x_weights.csv"))?;
            let x_loadings = read_matrix_csv(&dir.join("x_loadings.csv"))?;
            let y_loadings = read_matrix_csv(&dir.join("y_loadings.csv"))?;
            let x_scores = read_matrix_csv(&dir.join("x_scores.csv"))?;
            let coefficients = read_matrix_csv(&dir.join("coefficients.csv"))?;
            Ok(TrainedQuantifier::Plsr(PlsrModel::from_parts(
                meta.n_components.ok_or_else(|| missing(dir, "n_components"))?,
                meta.x_mean.ok_or_else(|| missing(dir, "x_mean"))?,
                meta.y_mean.ok_or_else(|| missing(dir, "y_mean"))?,
                x_weights,
                x_loadings,
                y_loadings,
                x_scores,
                coefficients,
            )))
        }
        "mean" => Ok(TrainedQuantifier::Mean(
            meta.kappa.ok_or_else(|| missing(dir, "kappa"))?,
        )),
        other => Err(AppError::Schema {
            path: json_path,
            msg: format!("unknown model type {other:?}"),
        }),
    }
}

/// Write a prediction matrix as CSV with gas-name headers.
pub fn write_predictions_csv(path: &Path, gas_names: &[String], pred: &Mat) -> Result<()> {
    let mut out = String::new();
    out.push_str(&gas_names.join(","));
    out.push('\n');
    for i in 0..pred.rows() {
        let row: Vec<String> = pred.row(i).iter().map(|v| format!("{v}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_string(path, &out)
}

/// Read a prediction matrix (header optional when `gas_names` is given).
pub fn read_predictions_csv(path: &Path, expected_gases: &[String]) -> Result<Mat> {
    let text = read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if i == 0 {
            let names: Vec<&str> = line.split(',').map(|s| s.trim()).collect();
            if names.iter().any(|c| c.parse::<f64>().is_err()) {
                // header row: must match the expected gas order
                if names.len() != expected_gases.len()
                    || names
                        .iter()
                        .zip(expected_gases)
                        .any(|(a, b)| *a != b.as_str())
                {
                    return Err(AppError::Schema {
                        path: path.to_path_buf(),
                        msg: format!("prediction header {names:?} does not match gas names"),
                    });
                }
                continue;
            }
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            row.push(super::parse_f64(path, i + 1, cell)?);
        }
        if row.len() != expected_gases.len() {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                row: i + 1,
                msg: format!("expected {} columns, got {}", expected_gases.len(), row.len()),
            });
        }
        rows.push(row);
    }
    Ok(Mat::from_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use specquant_core::eval::{fit_model, HarnessOptions, ModelKind};
    use specquant_core::gas::{synthesize_library, LibraryProfile};
    use specquant_core::quant::RetainSpec;
    use specquant_core::synth::{generate_dataset, GroupPreset, NoiseSpec};
    use specquant_core::WavelengthGrid;

    #[test]
    fn every_model_kind_roundtrips_bit_exactly() {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 64).unwrap();
        let lib = synthesize_library(7, &grid, &LibraryProfile::DefaultNineGas).unwrap();
        let noise = NoiseSpec::from_snr_db(40.0).unwrap();
        let ds = generate_dataset(&lib, &GroupPreset::I.scheme(), 60, 10.0, Some(noise), 3).unwrap();
        let opts = HarnessOptions::default();
        let kinds = [
            ModelKind::Lr { components: 9 },
            ModelKind::Direct {
                components: 9,
                retain: RetainSpec::Global(2),
            },
            ModelKind::Tf {
                learn_b: true,
                learn_noise: true,
                calibration: 0,
            },
            ModelKind::Plsr { components: 5 },
            ModelKind::Mean,
        ];
        for kind in &kinds {
            let model = fit_model(kind, &ds, Some(&lib), &opts, None).unwrap();
            let dir = tempfile::tempdir().unwrap();
            save_model(dir.path(), &model).unwrap();
            let loaded = load_model(dir.path()).unwrap();
            assert_eq!(model, loaded, "kind {kind:?}");
            // and predictions agree bitwise
            let p1 = model.predict(&ds.absorbances).unwrap();
            let p2 = loaded.predict(&ds.absorbances).unwrap();
            assert_eq!(p1, p2);
        }
    }

    #[test]
    fn predictions_csv_roundtrip() {
        let gas_names: Vec<String> = vec!["a".into(), "b".into()];
        let pred = Mat::from_vec(2, 2, vec![1.5e-6, 0.0, -3.25e-9, 7.125e-6]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pred.csv");
        write_predictions_csv(&path, &gas_names, &pred).unwrap();
        let loaded = read_predictions_csv(&path, &gas_names).unwrap();
        assert_eq!(pred, loaded);
    }
}
