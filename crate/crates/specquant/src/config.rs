//! Resolved-config provenance files.
//!
//! Every command writes a JSON file next to its outputs holding the fully
//! resolved parameters, sufficient to re-run the command bit-identically.

use std::path::{Path, PathBuf};

use serde_json::Value;

use crate::formats::write_string;
use crate::Result;

pub const CONFIG_NAME: &str = "resolved_config.json";

/// Location of the config file for an output path: inside directories,
/// `<file>.config.json` next to plain files.
pub fn config_path(out: &Path, out_is_dir: bool) -> PathBuf {
    if out_is_dir {
        out.join(CONFIG_NAME)
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".config.json");
        out.with_file_name(name)
    }
}

pub fn write_resolved_config(
    out: &Path,
    out_is_dir: bool,
    command: &str,
    threads: usize,
    params: Value,
) -> Result<()> {
    let doc = serde_json::json!({
        "command": command,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "threads": threads,
        "params": params,
    });
    let json = serde_json::to_string_pretty(&doc).expect("config serializes");
    write_string(&config_path(out, out_is_dir), &json)
}
