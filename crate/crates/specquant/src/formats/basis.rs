//! Principal-component basis directory: `basis.csv` holds the wavelength
//! column, the mean and one column per component; `basis.json` carries
//! eigenvalues and fit metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};
use specquant_core::pca::PcBasis;
use specquant_core::{Flavor, Mat};

use super::spectra_csv::{read_spectra_csv, write_spectra_csv};
use super::{read_to_string, write_string};
use crate::{AppError, Result};

pub const BASIS_CSV: &str = "basis.csv";
pub const BASIS_JSON: &str = "basis.json";

#[derive(Debug, Serialize, Deserialize)]
struct BasisSidecar {
    format_version: u32,
    flavor: String,
    centered: bool,
    eigenvalues: Vec<f64>,
    total_variance: f64,
    effective_rank: usize,
    n_samples: usize,
    fingerprint: String,
}

pub fn flavor_name(flavor: Flavor) -> &'static str {
    flavor.name()
}

pub fn parse_flavor(name: &str) -> Result<Flavor> {
    match name {
        "fpca" => Ok(Flavor::Functional),
        "pca" => Ok(Flavor::Plain),
        other => Err(AppError::Usage(format!(
            "unknown flavor {other:?} (expected fpca or pca)"
        ))),
    }
}

pub fn save_basis(dir: &Path, basis: &PcBasis) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut columns: Vec<(String, Vec<f64>)> = Vec::with_capacity(basis.len() + 1);
    columns.push(("mean".into(), basis.mean().to_vec()));
    for l in 0..basis.len() {
        columns.push((format!("pc{}", l + 1), basis.component(l).to_vec()));
    }
    write_spectra_csv(&dir.join(BASIS_CSV), basis.grid(), &columns)?;
    let sidecar = BasisSidecar {
        format_version: 1,
        flavor: basis.flavor().name().into(),
        centered: basis.centered(),
        eigenvalues: basis.eigenvalues().to_vec(),
        total_variance: basis.total_variance(),
        effective_rank: basis.effective_rank(),
        n_samples: basis.n_samples(),
        fingerprint: format!("{:016x}", basis.fingerprint()),
    };
    let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    write_string(&dir.join(BASIS_JSON), &json)
}

pub fn load_basis(dir: &Path) -> Result<PcBasis> {
    let json_path = dir.join(BASIS_JSON);
    let sidecar: BasisSidecar =
        serde_json::from_str(&read_to_string(&json_path)?).map_err(|e| AppError::Schema {
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
    let flavor = parse_flavor(&sidecar.flavor)?;
    let (grid, cols) = read_spectra_csv(&dir.join(BASIS_CSV))?;
    if cols.is_empty() || cols[0].0 != "mean" {
        return Err(AppError::Schema {
            path: dir.join(BASIS_CSV),
            msg: "first column must be the mean".into(),
        });
    }
    let mean = cols[0].1.clone();
    let n_comp = cols.len() - 1;
    if sidecar.eigenvalues.len() != n_comp {
        return Err(AppError::Schema {
            path: json_path.clone(),
            msg: format!(
                "{} eigenvalues for {n_comp} components",
                sidecar.eigenvalues.len()
            ),
        });
    }
    let mut components = Mat::zeros(n_comp, grid.len());
    for (l, (_, values)) in cols[1..].iter().enumerate() {
        components.row_mut(l).copy_from_slice(values);
    }
    let basis = PcBasis::from_parts(
        grid,
        flavor,
        sidecar.centered,
        mean,
        components,
        sidecar.eigenvalues,
        sidecar.total_variance,
        sidecar.effective_rank,
        sidecar.n_samples,
    )?;
    let expected = u64::from_str_radix(&sidecar.fingerprint, 16).unwrap_or(0);
    if basis.fingerprint() != expected {
        return Err(AppError::Fingerprint {
            msg: format!(
                "basis content hash {:016x} does not match stored {:016x}",
                basis.fingerprint(),
                expected
            ),
        });
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use specquant_core::pca::fit_pca;
    use specquant_core::rng::{stream, uniform, Domain};
    use specquant_core::WavelengthGrid;

    #[test]
    fn basis_roundtrip_is_bit_exact() {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 40).unwrap();
        let mut rng = stream(3, Domain::Generic, 0);
        let data = Mat::from_vec(
            25,
            40,
            (0..1000).map(|_| uniform(&mut rng, -1.0, 1.0)).collect(),
        );
        let basis = fit_pca(&data, &grid, Flavor::Functional, true, 6).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_basis(dir.path(), &basis).unwrap();
        let loaded = load_basis(dir.path()).unwrap();
        assert_eq!(basis, loaded);
        assert_eq!(basis.fingerprint(), loaded.fingerprint());
    }
}
