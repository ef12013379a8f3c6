//! Subcommand implementations. Each returns the files it wrote; the caller
//! adds the manifest.

use std::io::Write;
use std::sync::Arc;

use qpm_core::jsa::correlation_time;
use qpm_core::metrology::analyze_batch;
use qpm_core::tuning::{bandwidth_report, classify_regime_with, RegimeCriteria};
use qpm_core::{
    brightness_lower_bound, jsa, marginal_spectrum, pump_sweep_bandwidth, solve_design_point,
    temperature_map, Arm, BrightnessInput, Dispersion, Marginal, ProcessConfig, WorkingPoint,
};
use serde::Serialize;

use crate::config::{ModelInfo, RunConfig};
use crate::exit::{CliError, CliResult};
use crate::fringe_io::{expand_scan_paths, load_scan};
use crate::output::OutputDir;

/// Model and configuration of one run, with the frame conversions.
pub struct Run {
    pub config: RunConfig,
    pub model: Arc<dyn Dispersion>,
    pub model_info: ModelInfo,
}

/// Operating point in the laboratory frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LabPoint {
    pub pump_wavelength_nm: f64,
    pub temperature_c: f64,
    pub signal_wavelength_nm: f64,
}

impl Run {
    pub fn new(mut config: RunConfig) -> CliResult<Self> {
        config.validate()?;
        let (model, model_info) = config.load_model()?;
        Ok(Self {
            config,
            model,
            model_info,
        })
    }

    pub fn temperature_to_model(&self, lab_c: f64) -> f64 {
        lab_c - self.config.temp_offset_k
    }

    pub fn temperature_to_lab(&self, model_c: f64) -> f64 {
        model_c + self.config.temp_offset_k
    }

    pub fn pump_to_model(&self, lab_nm: f64) -> f64 {
        lab_nm - self.config.pump_offset_nm
    }

    pub fn pump_to_lab(&self, model_nm: f64) -> f64 {
        model_nm + self.config.pump_offset_nm
    }

    pub fn solve_design(&self) -> CliResult<WorkingPoint> {
        Ok(solve_design_point(
            self.model.clone(),
            &self.config.waveguide,
            &self.config.design,
        )?)
    }

    /// Configured operating point, completed from the design point when needed.
    pub fn operating_point(&self) -> CliResult<LabPoint> {
        let op = &self.config.operating_point;
        let design = if op.is_complete() {
            None
        } else {
            Some(self.solve_design()?)
        };
        let from_design = |f: fn(&WorkingPoint) -> f64| design.as_ref().map(f).unwrap_or(f64::NAN);
        Ok(LabPoint {
            pump_wavelength_nm: op
                .pump_wavelength_nm
                .unwrap_or_else(|| self.pump_to_lab(from_design(|w| w.pump_wavelength_nm))),
            temperature_c: op
                .temperature_c
                .unwrap_or_else(|| self.temperature_to_lab(from_design(|w| w.temperature_c))),
            signal_wavelength_nm: op
                .signal_wavelength_nm
                .unwrap_or_else(|| from_design(|w| w.signal_wavelength_nm)),
        })
    }

    pub fn process_config(&self, p: &LabPoint) -> CliResult<ProcessConfig> {
        Ok(ProcessConfig::from_wavelengths(
            self.model.clone(),
            self.config.waveguide.clone(),
            self.pump_to_model(p.pump_wavelength_nm),
            p.signal_wavelength_nm,
            self.temperature_to_model(p.temperature_c),
        )?)
    }

    fn temperature_range_model(
        &self,
        explicit: Option<[f64; 2]>,
        span_k: f64,
        centre_lab: f64,
    ) -> [f64; 2] {
        let [lo, hi] = explicit.unwrap_or([centre_lab - span_k, centre_lab + span_k]);
        [self.temperature_to_model(lo), self.temperature_to_model(hi)]
    }
}

#[derive(Serialize)]
struct DesignOutput<'a> {
    lab: LabPoint,
    idler_wavelength_nm: f64,
    temp_offset_k: f64,
    pump_offset_nm: f64,
    within_tolerances: bool,
    model_frame: &'a WorkingPoint,
}

pub fn design(run: &Run, out: &mut OutputDir, stdout: &mut dyn Write) -> CliResult<()> {
    let wp = run.solve_design()?;
    let lab = LabPoint {
        pump_wavelength_nm: run.pump_to_lab(wp.pump_wavelength_nm),
        temperature_c: run.temperature_to_lab(wp.temperature_c),
        signal_wavelength_nm: wp.signal_wavelength_nm,
    };
    out.write_json(
        "working_point.json",
        &DesignOutput {
            lab,
            idler_wavelength_nm: wp.idler_wavelength_nm,
            temp_offset_k: run.config.temp_offset_k,
            pump_offset_nm: run.config.pump_offset_nm,
            within_tolerances: wp.within_tolerances(),
            model_frame: &wp,
        },
    )?;
    let r = &wp.residuals;
    let _ = writeln!(
        stdout,
        "poling period {:.4} um, model {}\n\
         pump        {:.4} nm (model {:.4} nm)\n\
         temperature {:.3} C (model {:.3} C)\n\
         signal      {:.3} nm, idler {:.1} nm\n\
         residuals   gv {:.2e} s/m, gvd {:.2e} s^2/m, delta_beta0 {:.2e} rad/m{}",
        wp.poling_period_um,
        run.model_info.name,
        lab.pump_wavelength_nm,
        wp.pump_wavelength_nm,
        lab.temperature_c,
        wp.temperature_c,
        wp.signal_wavelength_nm,
        wp.idler_wavelength_nm,
        r.gv_term_s_per_m,
        r.gvd_term_s2_per_m,
        r.delta_beta0_rad_per_m,
        if wp.within_tolerances() {
            ""
        } else {
            " (ABOVE TOLERANCE)"
        },
    );
    Ok(())
}

fn write_marginal(m: &Marginal, buf: &mut Vec<u8>) -> std::io::Result<()> {
    writeln!(buf, "lambda_nm,frequency_offset_thz,intensity")?;
    for i in 0..m.len() {
        writeln!(
            buf,
            "{},{},{:e}",
            m.wavelength_nm[i], m.frequency_offset_thz[i], m.intensity[i]
        )?;
    }
    Ok(())
}

pub fn jsa_cmd(run: &Run, out: &mut OutputDir, stdout: &mut dyn Write) -> CliResult<()> {
    let point = run.operating_point()?;
    let cfg = run.process_config(&point)?;
    let grid = run.config.grid.grid()?;
    let fraction = run.config.grid.fraction;
    let result = jsa(&cfg, &grid)?;
    let signal = marginal_spectrum(&result, Arm::Signal, false)?;
    let idler = marginal_spectrum(&result, Arm::Idler, false)?;
    let signal_report = bandwidth_report(&signal, fraction)?;
    let idler_report = bandwidth_report(&idler, fraction)?;
    let tau = correlation_time(&signal)?;
    out.write_with("jsa.csv", |b| result.write_csv(b))?;
    out.write_with("signal_marginal.csv", |b| write_marginal(&signal, b))?;
    out.write_with("idler_marginal.csv", |b| write_marginal(&idler, b))?;
    out.write_json(
        "spectrum.json",
        &serde_json::json!({
            "operating_point": point,
            "idler_wavelength_nm": cfg.idler_wavelength_nm(),
            "signal": signal_report,
            "idler": idler_report,
            "correlation_time_fs": tau,
        }),
    )?;
    let _ = writeln!(
        stdout,
        "signal FW{:.0} {:.3} THz (+/- {:.3}), main lobe {:.1} nm, correlation time {:.2} fs",
        fraction * 100.0,
        signal_report.width_thz,
        signal_report.uncertainty_thz,
        signal_report.main_lobe_span_nm(),
        tau
    );
    Ok(())
}

pub fn tune(run: &Run, out: &mut OutputDir, stdout: &mut dyn Write) -> CliResult<()> {
    let tc = &run.config.tune;
    let mut point = run.operating_point()?;
    point.pump_wavelength_nm += tc.pump_detuning_nm;
    let cfg = run.process_config(&point)?;
    let range = run.temperature_range_model(
        tc.temperature_range_c,
        tc.temperature_span_k,
        point.temperature_c,
    );
    let mut map = temperature_map(
        &cfg,
        range,
        tc.steps,
        &run.config.grid.grid()?,
        run.config.grid.fraction,
    )?;
    for t in &mut map.parameter_values {
        *t = run.temperature_to_lab(*t);
    }
    let regime = if tc.classify {
        Some(
            match classify_regime_with(&map, &RegimeCriteria::default()) {
                Ok(r) => serde_json::to_value(r).expect("regime report serializes"),
                Err(e) => serde_json::json!({ "error": e.to_string() }),
            },
        )
    } else {
        None
    };
    out.write_with("tuning_map.csv", |b| map.write_csv(b))?;
    let mut json = map.reports_json();
    json["operating_point"] = serde_json::to_value(point).expect("point serializes");
    json["peak_intensity"] = serde_json::to_value(&map.peak_intensity).expect("peaks serialize");
    if let Some(r) = &regime {
        json["regime"] = r.clone();
    }
    out.write_json("tuning_map.json", &json)?;
    let present = map.present().count();
    let _ = write!(stdout, "{present} of {} rows usable", map.rows.len());
    if let Some((t, r)) = map.broadest() {
        let _ = write!(stdout, "; broadest {:.3} THz at {t:.3} C", r.width_thz);
    }
    match regime.as_ref().and_then(|r| r.get("regime")) {
        Some(r) => {
            let _ = writeln!(stdout, "; regime {}", r.as_str().unwrap_or("?"));
        }
        None => {
            let _ = writeln!(stdout);
        }
    }
    Ok(())
}

pub fn sweep(run: &Run, out: &mut OutputDir, stdout: &mut dyn Write) -> CliResult<()> {
    let sc = &run.config.sweep;
    let point = run.operating_point()?;
    let pumps_lab: Vec<f64> = match &sc.pump_wavelengths_nm {
        Some(p) => p.clone(),
        None => sc
            .pump_detunings_nm
            .iter()
            .map(|d| point.pump_wavelength_nm + d)
            .collect(),
    };
    let pumps_model: Vec<f64> = pumps_lab.iter().map(|&p| run.pump_to_model(p)).collect();
    let cfg = run.process_config(&point)?;
    let range = run.temperature_range_model(
        sc.temperature_range_c,
        sc.temperature_span_k,
        point.temperature_c,
    );
    let mut surface = pump_sweep_bandwidth(
        &cfg,
        &pumps_model,
        range,
        sc.steps,
        &run.config.grid.grid()?,
        run.config.grid.fraction,
    )?;
    surface.pump_wavelength_nm = pumps_lab;
    for t in surface.temperature_c.iter_mut() {
        *t = run.temperature_to_lab(*t);
    }
    for t in surface.best_temperature_c.iter_mut().flatten() {
        *t = run.temperature_to_lab(*t);
    }
    out.write_with("bandwidth_surface.csv", |b| surface.write_csv(b))?;
    out.write_json("bandwidth_surface.json", &surface)?;
    for ((p, t), w) in surface
        .pump_wavelength_nm
        .iter()
        .zip(&surface.best_temperature_c)
        .zip(&surface.best_width_thz)
    {
        let _ = match (t, w) {
            (Some(t), Some(w)) => writeln!(stdout, "pump {p:.4} nm: best {w:.3} THz at {t:.3} C"),
            _ => writeln!(stdout, "pump {p:.4} nm: no usable rows"),
        };
    }
    Ok(())
}

pub fn loss(run: &Run, out: &mut OutputDir, stdout: &mut dyn Write) -> CliResult<()> {
    let paths = expand_scan_paths(&run.config.loss.scans)?;
    let scans = paths
        .iter()
        .map(|p| load_scan(p, run.model.as_ref()).map(|s| (s.id, s.scan)))
        .collect::<CliResult<Vec<_>>>()?;
    let reports = analyze_batch(&scans);
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    out.write_with("loss_report.csv", |b| {
        writeln!(b, "waveguide_id,contrast,reflectivity,loss_db_per_cm,flags")?;
        for r in &reports {
            writeln!(
                b,
                "{},{},{},{},{}",
                r.waveguide_id,
                opt(r.contrast),
                r.reflectivity,
                opt(r.loss_db_per_cm),
                r.flags.join(";")
            )?;
        }
        Ok(())
    })?;
    out.write_json("loss_report.json", &reports)?;
    for r in &reports {
        let _ = match r.loss_db_per_cm {
            Some(a) => writeln!(stdout, "{}: {a:.4} dB/cm", r.waveguide_id),
            None => writeln!(stdout, "{}: failed ({})", r.waveguide_id, r.flags.join(";")),
        };
    }
    let failed = reports.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        return Err(CliError::ScansFailed {
            failed,
            total: reports.len(),
        });
    }
    Ok(())
}

pub fn brightness(
    input: &BrightnessInput,
    out: &mut OutputDir,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let report = brightness_lower_bound(input)?;
    out.write_json("brightness.json", &report)?;
    let _ = write!(
        stdout,
        "brightness >= {:e} counts/(s mW GHz)",
        report.lower_bound
    );
    let _ = match report.efficiency_corrected_estimate {
        Some(e) => writeln!(stdout, "; efficiency corrected {e:e}"),
        None => writeln!(stdout),
    };
    Ok(())
}
