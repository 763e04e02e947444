//! Binary dataset container: `SPQD` magic, little-endian u32 header length,
//! JSON header, then row-major little-endian f64 payload (absorbances first,
//! concentrations second).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use specquant_core::synth::{ConcentrationMode, ConcentrationScheme, NoiseSpec, SpectraDataset};
use specquant_core::{Mat, WavelengthGrid};

use crate::{AppError, Result};

const MAGIC: &[u8; 4] = b"SPQD";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct NoiseHeader {
    snr_db: f64,
    sigma: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SchemeHeader {
    mode: String,
    low_molar: f64,
    high_molar: f64,
    presence_prob: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    format_version: u32,
    n_samples: usize,
    n_wavelengths: usize,
    n_gases: usize,
    seed: u64,
    path_length_cm: f64,
    noise: Option<NoiseHeader>,
    scheme: SchemeHeader,
    library_fingerprint: String,
    gas_names: Vec<String>,
    grid_points: Vec<f64>,
}

pub fn save_dataset(path: &Path, ds: &SpectraDataset) -> Result<()> {
    let header = DatasetHeader {
        format_version: FORMAT_VERSION,
        n_samples: ds.n_samples(),
        n_wavelengths: ds.n_wavelengths(),
        n_gases: ds.n_gases(),
        seed: ds.seed,
        path_length_cm: ds.path_length_cm,
        noise: ds.noise.map(|ns| NoiseHeader {
            snr_db: ns.snr_db(),
            sigma: ns.sigma(),
        }),
        scheme: SchemeHeader {
            mode: match ds.scheme.mode {
                ConcentrationMode::Uniform => "uniform".into(),
                ConcentrationMode::LogUniform => "log-uniform".into(),
            },
            low_molar: ds.scheme.low,
            high_molar: ds.scheme.high,
            presence_prob: ds.scheme.presence_prob,
        },
        library_fingerprint: format!("{:016x}", ds.library_fingerprint),
        gas_names: ds.gas_names.clone(),
        grid_points: ds.grid.points().to_vec(),
    };
    let header_json = serde_json::to_vec(&header).expect("header serializes");
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| AppError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let mut emit = |bytes: &[u8]| -> Result<()> {
        w.write_all(bytes).map_err(|e| AppError::io(path, e))
    };
    emit(MAGIC)?;
    emit(&(header_json.len() as u32).to_le_bytes())?;
    emit(&header_json)?;
    for &v in ds.absorbances.data() {
        emit(&v.to_le_bytes())?;
    }
    for &v in ds.concentrations.data() {
        emit(&v.to_le_bytes())?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<SpectraDataset> {
    let file = std::fs::File::open(path).map_err(|e| AppError::io(path, e))?;
    let mut r = std::io::BufReader::new(file);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|e| AppError::io(path, e))?;
    if &magic != MAGIC {
        return Err(AppError::Schema {
            path: path.to_path_buf(),
            msg: "not a dataset file (bad magic)".into(),
        });
    }
    let mut len_bytes = [0u8; 4];
    r.read_exact(&mut len_bytes).map_err(|e| AppError::io(path, e))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json)
        .map_err(|_| AppError::Truncated {
            path: path.to_path_buf(),
        })?;
    let header: DatasetHeader =
        serde_json::from_slice(&header_json).map_err(|e| AppError::Schema {
            path: path.to_path_buf(),
            msg: format!("header: {e}"),
        })?;
    if header.format_version != FORMAT_VERSION {
        return Err(AppError::Version {
            path: path.to_path_buf(),
            expected: FORMAT_VERSION,
            got: header.format_version,
        });
    }
    let (n, m, k) = (header.n_samples, header.n_wavelengths, header.n_gases);
    if header.grid_points.len() != m || header.gas_names.len() != k {
        return Err(AppError::Schema {
            path: path.to_path_buf(),
            msg: "header dimensions disagree with grid or gas names".into(),
        });
    }
    let fingerprint = u64::from_str_radix(&header.library_fingerprint, 16).map_err(|_| {
        AppError::Schema {
            path: path.to_path_buf(),
            msg: "library fingerprint is not hex".into(),
        }
    })?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload).map_err(|e| AppError::io(path, e))?;
    let expected = 8 * (n * m + n * k);
    if payload.len() != expected {
        let row_stride = 8 * (m + k);
        let deficit = expected as i64 - payload.len() as i64;
        if deficit > 0 && row_stride > 0 && deficit % row_stride as i64 == 0 {
            // whole sample rows missing: the header overstates n
            return Err(AppError::Schema {
                path: path.to_path_buf(),
                msg: format!(
                    "header claims {n} samples but payload holds {}",
                    n as i64 - deficit / row_stride as i64
                ),
            });
        }
        return Err(AppError::Truncated {
            path: path.to_path_buf(),
        });
    }
    let mut values = Vec::with_capacity(expected / 8);
    for chunk in payload.chunks_exact(8) {
        values.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    let conc_data = values.split_off(n * m);
    let absorbances = Mat::from_vec(n, m, values);
    let concentrations = Mat::from_vec(n, k, conc_data);
    if !absorbances.is_finite() || !concentrations.is_finite() {
        return Err(AppError::Schema {
            path: path.to_path_buf(),
            msg: "payload contains non-finite values".into(),
        });
    }
    let grid = WavelengthGrid::new(header.grid_points)?;
    let mode = match header.scheme.mode.as_str() {
        "uniform" => ConcentrationMode::Uniform,
        "log-uniform" => ConcentrationMode::LogUniform,
        other => {
            return Err(AppError::Schema {
                path: path.to_path_buf(),
                msg: format!("unknown concentration mode {other:?}"),
            })
        }
    };
    let scheme = ConcentrationScheme::new(
        mode,
        header.scheme.low_molar,
        header.scheme.high_molar,
        header.scheme.presence_prob,
    )?;
    let noise = match header.noise {
        Some(nh) => Some(NoiseSpec::from_snr_db(nh.snr_db)?),
        None => None,
    };
    Ok(SpectraDataset {
        grid,
        gas_names: header.gas_names,
        absorbances,
        concentrations,
        path_length_cm: header.path_length_cm,
        noise,
        scheme,
        seed: header.seed,
        library_fingerprint: fingerprint,
    })
}

/// Require that a dataset was generated from this library.
pub fn check_dataset_library(
    ds: &SpectraDataset,
    lib: &specquant_core::gas::GasLibrary,
) -> Result<()> {
    if ds.library_fingerprint != lib.fingerprint() {
        return Err(AppError::Fingerprint {
            msg: format!(
                "dataset was generated from library {:016x}, given {:016x}",
                ds.library_fingerprint,
                lib.fingerprint()
            ),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use specquant_core::gas::{synthesize_library, LibraryProfile};
    use specquant_core::synth::{generate_dataset, GroupPreset};

    fn sample_dataset() -> SpectraDataset {
        let grid = WavelengthGrid::uniform(2.5, 14.0, 48).unwrap();
        let lib = synthesize_library(7, &grid, &LibraryProfile::DefaultNineGas).unwrap();
        let noise = NoiseSpec::from_snr_db(30.0).unwrap();
        generate_dataset(&lib, &GroupPreset::II.scheme(), 12, 10.0, Some(noise), 3).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.spqd");
        save_dataset(&path, &ds).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(ds, loaded);
        assert_eq!(ds.fingerprint(), loaded.fingerprint());
    }

    #[test]
    fn truncated_payload_detected() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.spqd");
        save_dataset(&path, &ds).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(AppError::Truncated { .. })
        ));
    }

    #[test]
    fn missing_rows_are_a_dimension_error() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.spqd");
        save_dataset(&path, &ds).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // drop exactly one sample row (m + k doubles)
        let row = 8 * (ds.n_wavelengths() + ds.n_gases());
        std::fs::write(&path, &bytes[..bytes.len() - row]).unwrap();
        match load_dataset(&path) {
            Err(AppError::Schema { msg, .. }) => assert!(msg.contains("11")),
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_detected() {
        let ds = sample_dataset();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.spqd");
        save_dataset(&path, &ds).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // bump the version digit inside the JSON header
        let json_start = 8;
        let header_len = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let header = String::from_utf8(bytes[json_start..json_start + header_len].to_vec()).unwrap();
        let patched = header.replace("\"format_version\":1", "\"format_version\":9");
        assert_ne!(header, patched);
        bytes.splice(json_start..json_start + header_len, patched.into_bytes());
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_dataset(&path),
            Err(AppError::Version { got: 9, .. })
        ));
    }

    #[test]
    fn fingerprint_check_rejects_other_library() {
        let ds = sample_dataset();
        let grid = WavelengthGrid::uniform(2.5, 14.0, 48).unwrap();
        let other = synthesize_library(8, &grid, &LibraryProfile::DefaultNineGas).unwrap();
        assert!(matches!(
            check_dataset_library(&ds, &other),
            Err(AppError::Fingerprint { .. })
        ));
    }
}
