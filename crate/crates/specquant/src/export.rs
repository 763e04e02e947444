//! Tidy CSV bundles for external plotting, one file per figure analog plus a
//! manifest describing axes. Output is deterministic: identical inputs give
//! byte-identical files.

use std::path::Path;

use serde::Serialize;

use crate::formats::write_string;
use crate::report_json::{
    JsonEvalReport, JsonOutOfRange, JsonPcSweep, JsonSnrSweep, JsonTrainSizeSweep, ReportJson,
};
use crate::Result;

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    x_axis: String,
    y_axis: String,
    description: String,
}

#[derive(Serialize)]
struct Manifest {
    files: Vec<ManifestEntry>,
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}

fn finish(dir: &Path, entries: Vec<ManifestEntry>) -> Result<()> {
    let manifest = Manifest { files: entries };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_string(&dir.join("manifest.json"), &json)
}

pub fn export_eval(dir: &Path, reports: &[JsonEvalReport]) -> Result<()> {
    let mut summary = String::from("model,dataset,gas,rmse,mape,excluded_zeros,random_guess_rmse\n");
    let mut folds = String::from("model,gas,fold,rmse\n");
    for r in reports {
        for (g, gas) in r.gas_names.iter().enumerate() {
            summary.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.model,
                r.dataset,
                gas,
                r.per_gas_rmse[g],
                cell(r.per_gas_mape[g]),
                r.mape_excluded_zeros[g],
                r.random_guess_rmse[g]
            ));
            for (f, fm) in r.folds.iter().enumerate() {
                folds.push_str(&format!(
                    "{},{},{},{}\n",
                    r.model, gas, f, fm.per_gas_rmse[g]
                ));
            }
        }
    }
    write_string(&dir.join("report_summary.csv"), &summary)?;
    write_string(&dir.join("report_folds.csv"), &folds)?;
    finish(
        dir,
        vec![
            ManifestEntry {
                file: "report_summary.csv".into(),
                x_axis: "gas".into(),
                y_axis: "rmse (M), mape (fraction)".into(),
                description: "pooled per-gas metrics with the random-guess baseline".into(),
            },
            ManifestEntry {
                file: "report_folds.csv".into(),
                x_axis: "fold".into(),
                y_axis: "rmse (M)".into(),
                description: "per-fold per-gas RMSE for variance estimates".into(),
            },
        ],
    )
}

pub fn export_pc_sweep(dir: &Path, sweep: &JsonPcSweep) -> Result<()> {
    let mut rmse = String::from("model,gas,n_components,rmse\n");
    for (i, &l) in sweep.ls.iter().enumerate() {
        for (g, gas) in sweep.gas_names.iter().enumerate() {
            rmse.push_str(&format!("{},{},{},{}\n", sweep.model, gas, l, sweep.rmse[i][g]));
        }
    }
    let mut delta = String::from("model,gas,n_components,delta_rmse\n");
    for (i, row) in sweep.delta.iter().enumerate() {
        let l = sweep.ls[i + 1];
        for (g, gas) in sweep.gas_names.iter().enumerate() {
            delta.push_str(&format!("{},{},{},{}\n", sweep.model, gas, l, row[g]));
        }
    }
    write_string(&dir.join("pc_sweep_rmse.csv"), &rmse)?;
    write_string(&dir.join("pc_sweep_delta.csv"), &delta)?;
    finish(
        dir,
        vec![
            ManifestEntry {
                file: "pc_sweep_rmse.csv".into(),
                x_axis: "n_components".into(),
                y_axis: "rmse (M)".into(),
                description: "per-gas quantification RMSE vs retained components".into(),
            },
            ManifestEntry {
                file: "pc_sweep_delta.csv".into(),
                x_axis: "n_components".into(),
                y_axis: "delta_rmse (M)".into(),
                description: "RMSE change when adding each component".into(),
            },
        ],
    )
}

pub fn export_train_size(dir: &Path, sweeps: &[JsonTrainSizeSweep]) -> Result<()> {
    let mut per_gas = String::from("model,size,gas,rmse\n");
    let mut means = String::from("model,size,mean_rmse\n");
    for s in sweeps {
        for p in &s.points {
            means.push_str(&format!("{},{},{}\n", s.model, p.size, p.mean_rmse));
            for (g, gas) in s.gas_names.iter().enumerate() {
                per_gas.push_str(&format!(
                    "{},{},{},{}\n",
                    s.model, p.size, gas, p.per_gas_rmse[g]
                ));
            }
        }
    }
    write_string(&dir.join("train_size_rmse.csv"), &per_gas)?;
    write_string(&dir.join("train_size_mean.csv"), &means)?;
    finish(
        dir,
        vec![
            ManifestEntry {
                file: "train_size_rmse.csv".into(),
                x_axis: "size".into(),
                y_axis: "rmse (M)".into(),
                description: "per-gas RMSE vs number of training samples".into(),
            },
            ManifestEntry {
                file: "train_size_mean.csv".into(),
                x_axis: "size".into(),
                y_axis: "mean_rmse (M)".into(),
                description: "all-gas mean RMSE vs number of training samples".into(),
            },
        ],
    )
}

pub fn export_snr_sweep(dir: &Path, sweep: &JsonSnrSweep) -> Result<()> {
    let mut per_gas = String::from("model,dataset,snr_db,gas,rmse\n");
    let mut means = String::from("model,dataset,snr_db,mean_rmse\n");
    for row in &sweep.rows {
        means.push_str(&format!(
            "{},{},{},{}\n",
            row.model,
            row.dataset,
            cell(row.snr_db),
            row.mean_rmse
        ));
        for (g, gas) in sweep.gas_names.iter().enumerate() {
            per_gas.push_str(&format!(
                "{},{},{},{},{}\n",
                row.model,
                row.dataset,
                cell(row.snr_db),
                gas,
                row.per_gas_rmse[g]
            ));
        }
    }
    write_string(&dir.join("snr_sweep_rmse.csv"), &per_gas)?;
    write_string(&dir.join("snr_sweep_mean.csv"), &means)?;
    finish(
        dir,
        vec![
            ManifestEntry {
                file: "snr_sweep_rmse.csv".into(),
                x_axis: "snr_db".into(),
                y_axis: "rmse (M)".into(),
                description: "per-gas RMSE across noise levels".into(),
            },
            ManifestEntry {
                file: "snr_sweep_mean.csv".into(),
                x_axis: "snr_db".into(),
                y_axis: "mean_rmse (M)".into(),
                description: "all-gas mean RMSE across noise levels".into(),
            },
        ],
    )
}

fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    Some(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
}

pub fn export_out_of_range(dir: &Path, study: &JsonOutOfRange) -> Result<()> {
    let mut mape = String::from(
        "model,gas,bin_lo,bin_hi,bin_center,population,count,mape_median,mape_mean,fold_std\n",
    );
    let mut sat = String::from(
        "model,gas,gamma,c_th,amplitude,residual,gamma_fold_std,gamma_box_lo,gamma_box_hi,cth_q20,cth_q80\n",
    );
    for m in &study.models {
        for gas in &m.per_gas {
            for b in &gas.bins {
                mape.push_str(&format!(
                    "{},{},{},{},{},in,{},{},{},{}\n",
                    m.model,
                    gas.gas,
                    b.lo,
                    b.hi,
                    b.center,
                    b.in_count,
                    cell(b.in_mape_median),
                    cell(b.in_mape_mean),
                    cell(b.in_fold_std)
                ));
                mape.push_str(&format!(
                    "{},{},{},{},{},out,{},{},{},{}\n",
                    m.model,
                    gas.gas,
                    b.lo,
                    b.hi,
                    b.center,
                    b.out_count,
                    cell(b.out_mape_median),
                    cell(b.out_mape_mean),
                    cell(b.out_fold_std)
                ));
            }
            let s = &gas.saturation;
            let fold_std = {
                let g = &s.fold_gammas;
                if g.len() > 1 {
                    let mean = g.iter().sum::<f64>() / g.len() as f64;
                    let var =
                        g.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (g.len() - 1) as f64;
                    Some(var.sqrt())
                } else {
                    None
                }
            };
            // gray-box annotation: plateau +/- 3 fold-sigma and the middle
            // 60% (0.2/0.8 quantiles) of per-fold knee estimates
            let (box_lo, box_hi) = match (s.gamma, fold_std) {
                (Some(g), Some(sd)) => (Some(g - 3.0 * sd), Some(g + 3.0 * sd)),
                _ => (None, None),
            };
            let mut cths: Vec<f64> = s.fold_cths.iter().filter_map(|&v| v).collect();
            cths.sort_by(|a, b| a.partial_cmp(b).unwrap());
            sat.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{}\n",
                m.model,
                gas.gas,
                cell(s.gamma),
                cell(s.c_th),
                cell(s.amplitude),
                cell(s.residual),
                cell(fold_std),
                cell(box_lo),
                cell(box_hi),
                cell(quantile(&cths, 0.2)),
                cell(quantile(&cths, 0.8))
            ));
        }
    }
    write_string(&dir.join("out_of_range_mape.csv"), &mape)?;
    write_string(&dir.join("saturation.csv"), &sat)?;
    finish(
        dir,
        vec![
            ManifestEntry {
                file: "out_of_range_mape.csv".into(),
                x_axis: "bin_center (M)".into(),
                y_axis: "mape (fraction)".into(),
                description: "binned MAPE, in-range vs out-of-range populations".into(),
            },
            ManifestEntry {
                file: "saturation.csv".into(),
                x_axis: "gas".into(),
                y_axis: "gamma (fraction), c_th (M)".into(),
                description: "plateau fits with fold-variance box annotations".into(),
            },
        ],
    )
}

/// Render the CSV bundle matching a persisted report.
pub fn export_report(dir: &Path, report: &ReportJson) -> Result<()> {
    match report {
        ReportJson::Eval { reports } => export_eval(dir, reports),
        ReportJson::PcSweep(s) => export_pc_sweep(dir, s),
        ReportJson::TrainSize { sweeps } => export_train_size(dir, sweeps),
        ReportJson::SnrSweep(s) => export_snr_sweep(dir, s),
        ReportJson::OutOfRange(s) => export_out_of_range(dir, s),
    }
}

/// Persist the tagged report next to its CSV bundle.
pub fn write_report_json(dir: &Path, report: &ReportJson) -> Result<()> {
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    write_string(&dir.join("report.json"), &json)
}
