//! Spectra CSV: `wavelength_um,<name1>,<name2>,...` with one grid point per
//! row. Wavelengths must increase strictly; all cells are plain decimal
//! numbers.

use std::path::Path;
use std::sync::Arc;

use specquant_core::{Spectrum, WavelengthGrid};

use super::{fmt_f64, parse_f64, read_to_string, write_string};
use crate::{AppError, Result};

pub fn write_spectra_csv(
    path: &Path,
    grid: &WavelengthGrid,
    spectra: &[(String, Vec<f64>)],
) -> Result<()> {
    for (name, values) in spectra {
        if values.len() != grid.len() {
            return Err(AppError::Schema {
                path: path.to_path_buf(),
                msg: format!("column {name} has {} values, grid has {}", values.len(), grid.len()),
            });
        }
        if name.contains(',') || name.trim().is_empty() {
            return Err(AppError::Schema {
                path: path.to_path_buf(),
                msg: format!("invalid column name {name:?}"),
            });
        }
    }
    let mut out = String::with_capacity(grid.len() * (spectra.len() + 1) * 20);
    out.push_str("wavelength_um");
    for (name, _) in spectra {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (j, &lam) in grid.points().iter().enumerate() {
        out.push_str(&fmt_f64(lam));
        for (_, values) in spectra {
            out.push(',');
            out.push_str(&fmt_f64(values[j]));
        }
        out.push('\n');
    }
    write_string(path, &out)
}

/// Returns the grid and the named columns in file order.
pub fn read_spectra_csv(path: &Path) -> Result<(Arc<WavelengthGrid>, Vec<(String, Vec<f64>)>)> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| AppError::Parse {
        path: path.to_path_buf(),
        row: 1,
        msg: "empty file".into(),
    })?;
    let mut cols = header.split(',');
    let first = cols.next().unwrap_or("");
    if first != "wavelength_um" {
        return Err(AppError::Parse {
            path: path.to_path_buf(),
            row: 1,
            msg: format!("header must start with wavelength_um, got {first:?}"),
        });
    }
    let names: Vec<String> = cols.map(|s| s.to_string()).collect();
    let n_cols = names.len() + 1;
    let mut wavelengths: Vec<f64> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != n_cols {
            return Err(AppError::Parse {
                path: path.to_path_buf(),
                row,
                msg: format!("ragged row: {} cells, expected {n_cols}", cells.len()),
            });
        }
        let lam = parse_f64(path, row, cells[0])?;
        if let Some(&prev) = wavelengths.last() {
            if lam <= prev {
                return Err(AppError::Parse {
                    path: path.to_path_buf(),
                    row,
                    msg: format!("wavelengths must increase strictly ({prev} then {lam})"),
                });
            }
        }
        wavelengths.push(lam);
        for (c, cell) in cells[1..].iter().enumerate() {
            columns[c].push(parse_f64(path, row, cell)?);
        }
    }
    let grid = WavelengthGrid::new(wavelengths)?;
    Ok((grid, names.into_iter().zip(columns).collect()))
}

/// Convenience wrapper building `Spectrum` values on the parsed grid.
pub fn read_spectra(path: &Path) -> Result<(Arc<WavelengthGrid>, Vec<(String, Spectrum)>)> {
    let (grid, cols) = read_spectra_csv(path)?;
    let mut out = Vec::with_capacity(cols.len());
    for (name, values) in cols {
        let s = Spectrum::new(grid.clone(), values)?;
        out.push((name, s));
    }
    Ok((grid, out))
}
