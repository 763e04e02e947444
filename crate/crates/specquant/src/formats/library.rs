//! Gas library directory: `extinction.csv` (spectra in the shared CSV
//! format) plus `library.json` with the per-gas norms.
//!
//! Exported libraries carry unit-norm columns and `"normalized": true`, which
//! round-trips bit-exactly. Raw (unnormalized) third-party spectra are also
//! accepted: columns are normalized on load and the recorded norm is the raw
//! column norm times the sidecar value.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use specquant_core::gas::GasLibrary;

use super::spectra_csv::{read_spectra, write_spectra_csv};
use super::{read_to_string, write_string};
use crate::{AppError, Result};

pub const LIBRARY_JSON: &str = "library.json";
pub const EXTINCTION_CSV: &str = "extinction.csv";

#[derive(Debug, Serialize, Deserialize)]
struct LibrarySidecar {
    format_version: u32,
    /// Gas name to extinction norm, 1/(M cm).
    norms: BTreeMap<String, f64>,
    /// True when the CSV columns are already unit-norm.
    #[serde(default)]
    normalized: bool,
    /// Content hash of the library (informational).
    #[serde(default)]
    fingerprint: Option<String>,
}

pub fn save_library(dir: &Path, lib: &GasLibrary) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let spectra: Vec<(String, Vec<f64>)> = lib
        .gases()
        .iter()
        .map(|g| (g.name.clone(), g.spectrum.values().to_vec()))
        .collect();
    write_spectra_csv(&dir.join(EXTINCTION_CSV), lib.grid(), &spectra)?;
    let sidecar = LibrarySidecar {
        format_version: 1,
        norms: lib
            .gases()
            .iter()
            .map(|g| (g.name.clone(), g.norm))
            .collect(),
        normalized: true,
        fingerprint: Some(format!("{:016x}", lib.fingerprint())),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_string(&dir.join(LIBRARY_JSON), &json)
}

pub fn load_library(dir: &Path) -> Result<GasLibrary> {
    let json_path = dir.join(LIBRARY_JSON);
    let text = read_to_string(&json_path)?;
    let sidecar: LibrarySidecar = serde_json::from_str(&text).map_err(|e| AppError::Schema {
        path: json_path.clone(),
        msg: e.to_string(),
    })?;
    if sidecar.format_version != 1 {
        return Err(AppError::Version {
            path: json_path,
            expected: 1,
            got: sidecar.format_version,
        });
    }
    let csv_path = dir.join(EXTINCTION_CSV);
    let (grid, spectra) = read_spectra(&csv_path)?;
    if spectra.len() != sidecar.norms.len() {
        return Err(AppError::Schema {
            path: json_path,
            msg: format!(
                "sidecar lists {} gases, CSV has {}",
                sidecar.norms.len(),
                spectra.len()
            ),
        });
    }
    let mut entries = Vec::with_capacity(spectra.len());
    for (name, spectrum) in spectra {
        let norm = *sidecar.norms.get(&name).ok_or_else(|| AppError::Schema {
            path: json_path.clone(),
            msg: format!("gas {name} missing from sidecar norms"),
        })?;
        entries.push((name, spectrum, norm));
    }
    let lib = if sidecar.normalized {
        GasLibrary::from_normalized(grid, entries)?
    } else {
        GasLibrary::from_raw(grid, entries)?
    };
    Ok(lib)
}
