//! Fringe scan files: a two-column CSV plus a JSON sidecar with the
//! waveguide metadata.
//!
//! `scan.csv` holds `axis,power` rows; an optional non-numeric header line
//! and `#` comment lines are skipped. `scan.json` next to it gives
//! `length_cm` and either `reflectivity` or `probe_wavelength_nm` plus
//! `polarization` (and optionally `temperature_c`), in which case R is the
//! Fresnel reflectivity of the model index.

use std::path::{Path, PathBuf};

use qpm_core::metrology::facet_reflectivity;
use qpm_core::{Dispersion, FringeScan, Polarization};
use serde::{Deserialize, Serialize};

use crate::exit::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub waveguide_id: Option<String>,
    pub length_cm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflectivity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe_wavelength_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarization: Option<Polarization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
}

/// Temperature used for the model index when the sidecar gives none.
pub const DEFAULT_PROBE_TEMPERATURE_C: f64 = 25.0;

impl ScanMeta {
    pub fn reflectivity(&self, model: &dyn Dispersion) -> CliResult<f64> {
        match (self.reflectivity, self.probe_wavelength_nm, self.polarization) {
            (Some(r), None, None) => Ok(r),
            (None, Some(l), Some(pol)) => Ok(facet_reflectivity(
                model,
                pol,
                l,
                self.temperature_c.unwrap_or(DEFAULT_PROBE_TEMPERATURE_C),
            )?),
            _ => Err(CliError::config(
                "sidecar needs either 'reflectivity' or both 'probe_wavelength_nm' and 'polarization'",
            )),
        }
    }
}

pub fn parse_scan_csv(text: &str, origin: &Path) -> CliResult<(Vec<f64>, Vec<f64>)> {
    let mut axis = Vec::new();
    let mut power = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse().ok()).collect();
        match parsed {
            Some(v) if v.len() == 2 => {
                axis.push(v[0]);
                power.push(v[1]);
            }
            None if axis.is_empty() && fields.len() == 2 => {}
            _ => {
                return Err(CliError::config(format!(
                    "{}:{}: expected two numeric columns, got '{line}'",
                    origin.display(),
                    n + 1
                )))
            }
        }
    }
    Ok((axis, power))
}

/// A scan file resolved against its sidecar.
#[derive(Debug, Clone)]
pub struct LoadedScan {
    pub id: String,
    pub path: PathBuf,
    pub scan: FringeScan,
}

/// Read `path` and its sidecar. The scan is not validated here so that bad
/// data ends up as a flagged row of the loss report.
pub fn load_scan(path: &Path, model: &dyn Dispersion) -> CliResult<LoadedScan> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let (axis, power) = parse_scan_csv(&text, path)?;
    let sidecar = path.with_extension("json");
    let meta_text = std::fs::read_to_string(&sidecar)
        .map_err(|e| CliError::config(format!("missing sidecar '{}': {e}", sidecar.display())))?;
    let meta: ScanMeta = serde_json::from_str(&meta_text)
        .map_err(|e| CliError::config(format!("{}: {e}", sidecar.display())))?;
    let reflectivity = meta
        .reflectivity(model)
        .map_err(|e| CliError::config(format!("{}: {e}", sidecar.display())))?;
    let id = meta.waveguide_id.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    Ok(LoadedScan {
        id,
        path: path.to_path_buf(),
        scan: FringeScan {
            axis,
            power,
            reflectivity,
            length_cm: meta.length_cm,
        },
    })
}

/// Expand directories into their `*.csv` files, sorted by name.
pub fn expand_scan_paths(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| CliError::io(p, e))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| {
                    f.extension().is_some_and(|x| x == "csv") && f.with_extension("json").is_file()
                })
                .collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::config(format!(
                "scan '{}' not found",
                p.display()
            )));
        }
    }
    if out.is_empty() {
        return Err(CliError::config("no fringe scans given"));
    }
    Ok(out)
}
