//! Run configuration: one TOML file per run, overridable by flags.
//!
//! Temperatures and pump wavelengths in the configuration and in every output
//! are in the laboratory frame. The model frame differs by the calibration
//! offsets: `model = lab − offset`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use qpm_core::dispersion::{BULK_MODEL_TOML, BUNDLED_MODEL_TOML};
use qpm_core::metrology::BrightnessInput;
use qpm_core::{DesignOptions, Dispersion, DispersionModel, SpectralGrid, WaveguideSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::{CliError, CliResult};

pub const BUILTIN_WAVEGUIDE: &str = "builtin:lithium_niobate_ti_waveguide.toml";
pub const BUILTIN_BULK: &str = "builtin:lithium_niobate_bulk.toml";
/// Extra search directory for relative model paths.
pub const MODEL_DIR_ENV: &str = "QPM_MODEL_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Model file path or one of the `builtin:` names.
    pub model: String,
    /// Output directory; not part of the recorded configuration.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// Lab temperature minus model temperature, K.
    pub temp_offset_k: f64,
    /// Lab pump wavelength minus model pump wavelength, nm.
    pub pump_offset_nm: f64,
    pub waveguide: WaveguideSpec,
    pub design: DesignOptions,
    pub operating_point: OperatingPoint,
    pub grid: GridConfig,
    pub tune: TuneConfig,
    pub sweep: SweepConfig,
    pub loss: LossConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brightness: Option<BrightnessInput>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: BUILTIN_WAVEGUIDE.into(),
            out: None,
            temp_offset_k: 0.0,
            pump_offset_nm: 0.0,
            waveguide: WaveguideSpec::default(),
            design: DesignOptions::default(),
            operating_point: OperatingPoint::default(),
            grid: GridConfig::default(),
            tune: TuneConfig::default(),
            sweep: SweepConfig::default(),
            loss: LossConfig::default(),
            brightness: None,
        }
    }
}

/// Fixed operating point; unset entries come from the solved working point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OperatingPoint {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_wavelength_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signal_wavelength_nm: Option<f64>,
}

impl OperatingPoint {
    pub fn is_complete(&self) -> bool {
        self.pump_wavelength_nm.is_some()
            && self.temperature_c.is_some()
            && self.signal_wavelength_nm.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub half_span_thz: f64,
    pub points: usize,
    /// Level for bandwidth extraction.
    pub fraction: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_span_thz: 40.0,
            points: 4097,
            fraction: 0.8,
        }
    }
}

impl GridConfig {
    pub fn grid(&self) -> CliResult<SpectralGrid> {
        Ok(SpectralGrid::from_thz(self.half_span_thz, self.points)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneConfig {
    /// Explicit lab temperature range; otherwise operating point ± span.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_range_c: Option<[f64; 2]>,
    pub temperature_span_k: f64,
    pub steps: usize,
    /// Pump shift from the operating point, nm.
    pub pump_detuning_nm: f64,
    pub classify: bool,
}

impl Default for TuneConfig {
    fn default() -> Self {
        Self {
            temperature_range_c: None,
            temperature_span_k: 10.0,
            steps: 4001,
            pump_detuning_nm: 0.0,
            classify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit lab pump wavelengths; otherwise operating point + detunings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pump_wavelengths_nm: Option<Vec<f64>>,
    pub pump_detunings_nm: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature_range_c: Option<[f64; 2]>,
    pub temperature_span_k: f64,
    pub steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            pump_wavelengths_nm: None,
            pump_detunings_nm: vec![-0.5, -0.25, 0.0, 0.25, 0.5, 1.0],
            temperature_range_c: None,
            temperature_span_k: 10.0,
            steps: 2001,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    /// Scan CSV files, or directories whose `*.csv` files are all used.
    pub scans: Vec<PathBuf>,
}

/// Identity of the loaded dispersion model, for manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub version: String,
    pub origin: String,
    pub sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn absolutize(path: &Path, base: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

impl RunConfig {
    /// Parse a configuration file; relative paths become relative to its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("cannot read config '{}': {e}", path.display()))
        })?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        cfg.rebase(base);
        Ok(cfg)
    }

    /// Make relative paths relative to `base`, except model paths that only
    /// exist under the model search directory.
    pub fn rebase(&mut self, base: &Path) {
        if !self.model.starts_with("builtin:") {
            let p = Path::new(&self.model);
            let candidate = absolutize(p, base);
            if p.is_absolute() || candidate.exists() || std::env::var_os(MODEL_DIR_ENV).is_none() {
                self.model = candidate.display().to_string();
            }
        }
        if let Some(out) = &self.out {
            self.out = Some(absolutize(out, base));
        }
        for s in &mut self.loss.scans {
            *s = absolutize(s, base);
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        for (name, v) in [
            ("temp_offset_k", self.temp_offset_k),
            ("pump_offset_nm", self.pump_offset_nm),
        ] {
            if !v.is_finite() {
                return Err(CliError::config(format!("{name} must be finite, got {v}")));
            }
        }
        self.waveguide.validate()?;
        self.design.validate()?;
        self.grid.grid()?;
        if !(self.grid.fraction > 0.0 && self.grid.fraction < 1.0) {
            return Err(CliError::config(format!(
                "grid.fraction {} must lie in (0, 1)",
                self.grid.fraction
            )));
        }
        let range_ok = |r: Option<[f64; 2]>, span: f64, what: &str| -> CliResult<()> {
            match r {
                Some([lo, hi]) if !(lo.is_finite() && hi.is_finite() && lo < hi) => Err(
                    CliError::config(format!("{what}.temperature_range_c [{lo}, {hi}] is empty")),
                ),
                None if !(span.is_finite() && span > 0.0) => Err(CliError::config(format!(
                    "{what}.temperature_span_k must be > 0, got {span}"
                ))),
                _ => Ok(()),
            }
        };
        range_ok(
            self.tune.temperature_range_c,
            self.tune.temperature_span_k,
            "tune",
        )?;
        range_ok(
            self.sweep.temperature_range_c,
            self.sweep.temperature_span_k,
            "sweep",
        )?;
        if self.tune.steps < 2 || self.sweep.steps < 2 {
            return Err(CliError::config("tune.steps and sweep.steps must be >= 2"));
        }
        let pumps = self
            .sweep
            .pump_wavelengths_nm
            .as_ref()
            .unwrap_or(&self.sweep.pump_detunings_nm);
        if pumps.is_empty() || pumps.iter().any(|p| !p.is_finite()) {
            return Err(CliError::config(
                "sweep needs at least one finite pump value",
            ));
        }
        Ok(())
    }

    /// Fully resolved configuration as TOML; rerunning it reproduces the run.
    pub fn to_toml(&self) -> CliResult<String> {
        toml::to_string(self)
            .map_err(|e| CliError::config(format!("cannot serialize configuration: {e}")))
    }

    /// Model file text and the canonical origin string.
    fn model_source(&self) -> CliResult<(String, String)> {
        match self.model.as_str() {
            BUILTIN_WAVEGUIDE | "builtin" | "builtin:waveguide" => Ok((
                BUNDLED_MODEL_TOML.to_string(),
                BUILTIN_WAVEGUIDE.to_string(),
            )),
            BUILTIN_BULK | "builtin:bulk" => {
                Ok((BULK_MODEL_TOML.to_string(), BUILTIN_BULK.to_string()))
            }
            other if other.starts_with("builtin:") => Err(CliError::config(format!(
                "unknown builtin model '{other}' (known: {BUILTIN_WAVEGUIDE}, {BUILTIN_BULK})"
            ))),
            path => {
                let path = resolve_model_path(Path::new(path))?;
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    CliError::config(format!("cannot read model '{}': {e}", path.display()))
                })?;
                Ok((text, path.display().to_string()))
            }
        }
    }

    /// Load the model with the waveguide's width correction selected.
    pub fn load_model(&mut self) -> CliResult<(Arc<dyn Dispersion>, ModelInfo)> {
        let (text, origin) = self.model_source()?;
        self.model = origin.clone();
        let model =
            DispersionModel::from_toml_str(&text, &origin)?.with_width(self.waveguide.width_um)?;
        let info = ModelInfo {
            name: model.name().to_string(),
            version: model.version().to_string(),
            origin,
            sha256: sha256_hex(text.as_bytes()),
        };
        Ok((Arc::new(model), info))
    }
}

/// A relative model path is tried as given, then under `QPM_MODEL_DIR`.
pub fn resolve_model_path(path: &Path) -> CliResult<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    let mut searched = vec![path.display().to_string()];
    if path.is_relative() {
        if let Some(dir) = std::env::var_os(MODEL_DIR_ENV) {
            let candidate = Path::new(&dir).join(path);
            if candidate.is_file() {
                return Ok(candidate);
            }
            searched.push(candidate.display().to_string());
        }
    }
    Err(CliError::config(format!(
        "model file '{}' not found (searched: {})",
        path.display(),
        searched.join(", ")
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let cfg: RunConfig = toml::from_str(
            "temp_offset_k = 40.0\n[waveguide]\npoling_period_um = 6.0\n[waveguide.polarizations]\npump = \"te\"\nsignal = \"tm\"\nidler = \"te\"\n",
        )
        .unwrap();
        assert_eq!(cfg.waveguide.poling_period_um, 6.0);
        assert_eq!(cfg.waveguide.length_mm, 40.0);
        assert_eq!(cfg.temp_offset_k, 40.0);
        assert_eq!(cfg.grid, GridConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("temperature_offset = 1.0").is_err());
        assert!(toml::from_str::<RunConfig>("[grid]\nspan = 3").is_err());
    }

    #[test]
    fn empty_ranges_fail_validation() {
        let mut cfg = RunConfig::default();
        cfg.design.pump_range_nm = [700.0, 600.0];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.tune.temperature_range_c = Some([210.0, 200.0]);
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn missing_model_names_the_path() {
        let mut cfg = RunConfig {
            model: "/nonexistent/model.toml".into(),
            ..Default::default()
        };
        let err = cfg.load_model().unwrap_err();
        assert!(err.to_string().contains("/nonexistent/model.toml"));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn builtin_models_load() {
        let mut cfg = RunConfig::default();
        let (_, info) = cfg.load_model().unwrap();
        assert_eq!(info.origin, BUILTIN_WAVEGUIDE);
        assert_eq!(info.sha256.len(), 64);
        let mut bulk = RunConfig {
            model: "builtin:bulk".into(),
            ..Default::default()
        };
        let (_, info) = bulk.load_model().unwrap();
        assert_eq!(bulk.model, BUILTIN_BULK);
        assert_ne!(info.sha256, sha256_hex(BUNDLED_MODEL_TOML.as_bytes()));
    }
}
