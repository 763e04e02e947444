//! On-disk formats: spectra CSV, library directories, binary datasets,
//! basis directories and model directories.
//!
//! All float text is written with Rust's shortest-round-trip formatting, so
//! write-then-read reproduces every value bit-exactly.

pub mod basis;
pub mod dataset;
pub mod library;
pub mod model;
pub mod spectra_csv;

use std::fmt::Write as _;
use std::path::Path;

use crate::{AppError, Result};

pub(crate) fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn write_string(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
        }
    }
    std::fs::write(path, content).map_err(|e| AppError::io(path, e))
}

/// Shortest representation that parses back to the identical f64.
pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub(crate) fn parse_f64(path: &Path, row: usize, cell: &str) -> Result<f64> {
    cell.trim().parse::<f64>().map_err(|_| AppError::Parse {
        path: path.to_path_buf(),
        row,
        msg: format!("expected a number, got {cell:?}"),
    })
}

/// Headerless matrix CSV: one row per line, comma-separated floats.
pub(crate) fn write_matrix_csv(path: &Path, m: &specquant_core::Mat) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let mut first = true;
        for &v in m.row(i) {
            if !first {
                out.push(',');
            }
            let _ = write!(out, "{v}");
            first = false;
        }
        out.push('\n');
    }
    write_string(path, &out)
}

pub(crate) fn read_matrix_csv(path: &Path) -> Result<specquant_core::Mat> {
    let text = read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for cell in line.split(',') {
            row.push(parse_f64(path, i + 1, cell)?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(AppError::Parse {
                    path: path.to_path_buf(),
                    row: i + 1,
                    msg: format!("ragged row: {} cells, expected {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(specquant_core::Mat::from_rows(&rows))
}
