//! Command-line driver: configuration files, subcommands, run manifests.

pub mod commands;
pub mod config;
pub mod exit;
pub mod fringe_io;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qpm_core::BrightnessInput;

use crate::commands::Run;
use crate::config::RunConfig;
use crate::exit::{exit_code_table, CliError, CliResult};
use crate::output::OutputDir;

#[derive(Debug, Parser)]
#[command(
    name = "qpm",
    version,
    about = "Dispersion engineering for poled-waveguide photon-pair sources"
)]
#[command(after_help = exit_code_table())]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by all subcommands; they override the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Run configuration (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output directory [default: qpm-<subcommand>].
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Dispersion model file or builtin name; relative paths also search $QPM_MODEL_DIR.
    #[arg(long, global = true, value_name = "PATH")]
    pub model: Option<String>,
    /// Lab minus model temperature.
    #[arg(
        long = "temp-offset",
        global = true,
        value_name = "K",
        allow_negative_numbers = true
    )]
    pub temp_offset_k: Option<f64>,
    /// Lab minus model pump wavelength.
    #[arg(
        long = "pump-offset",
        global = true,
        value_name = "NM",
        allow_negative_numbers = true
    )]
    pub pump_offset_nm: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the working point of the configured poling period.
    Design,
    /// Joint spectral amplitude, marginals, bandwidth and correlation time.
    Jsa,
    /// Temperature tuning map of the signal marginal, with regime classification.
    Tune,
    /// Bandwidth over pump wavelength and temperature.
    Sweep,
    /// Propagation loss from Fabry-Perot fringe scans.
    Loss {
        /// Scan CSV files or directories; replaces `loss.scans` of the configuration.
        #[arg(value_name = "SCAN")]
        scans: Vec<PathBuf>,
    },
    /// Lower bound of the source brightness from count rates.
    Brightness(BrightnessArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct BrightnessArgs {
    #[arg(long, value_name = "CPS")]
    pub detected_rate_cps: Option<f64>,
    #[arg(long, value_name = "CPS")]
    pub background_rate_cps: Option<f64>,
    #[arg(long, value_name = "MW")]
    pub pump_power_mw: Option<f64>,
    #[arg(long, value_name = "GHZ")]
    pub bandwidth_ghz: Option<f64>,
    /// Total detection efficiency in (0, 1].
    #[arg(long)]
    pub coupling_efficiency: Option<f64>,
    #[arg(long)]
    pub calibration_scale: Option<f64>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Design => "design",
            Command::Jsa => "jsa",
            Command::Tune => "tune",
            Command::Sweep => "sweep",
            Command::Loss { .. } => "loss",
            Command::Brightness(_) => "brightness",
        }
    }
}

fn brightness_input(
    cfg: Option<&BrightnessInput>,
    a: &BrightnessArgs,
) -> CliResult<BrightnessInput> {
    let missing = |name: &str| {
        CliError::config(format!(
            "brightness needs {name} (flag or [brightness] table)"
        ))
    };
    let base = cfg.cloned();
    let pick = |flag: Option<f64>, from_cfg: Option<f64>, name: &str| {
        flag.or(from_cfg).ok_or_else(|| missing(name))
    };
    let mut input = BrightnessInput::new(
        pick(
            a.detected_rate_cps,
            base.as_ref().map(|b| b.detected_rate_cps),
            "detected_rate_cps",
        )?,
        a.background_rate_cps
            .or(base.as_ref().map(|b| b.background_rate_cps))
            .unwrap_or(0.0),
        pick(
            a.pump_power_mw,
            base.as_ref().map(|b| b.pump_power_mw),
            "pump_power_mw",
        )?,
        pick(
            a.bandwidth_ghz,
            base.as_ref().map(|b| b.bandwidth_ghz),
            "bandwidth_ghz",
        )?,
    );
    input.coupling_efficiency = a
        .coupling_efficiency
        .or(base.as_ref().and_then(|b| b.coupling_efficiency));
    if let Some(s) = a
        .calibration_scale
        .or(base.as_ref().map(|b| b.calibration_scale))
    {
        input.calibration_scale = s;
    }
    input.validate()?;
    Ok(input)
}

/// Configuration file (if any) with the flags applied on top.
pub fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let cwd = Path::new(".");
    if let Some(m) = &c.model {
        cfg.model = m.clone();
        let out = cfg.out.take();
        let scans = std::mem::take(&mut cfg.loss.scans);
        cfg.rebase(cwd);
        cfg.out = out;
        cfg.loss.scans = scans;
    }
    if let Some(o) = &c.out {
        cfg.out = Some(o.clone());
    }
    if let Some(t) = c.temp_offset_k {
        cfg.temp_offset_k = t;
    }
    if let Some(p) = c.pump_offset_nm {
        cfg.pump_offset_nm = p;
    }
    match &cli.command {
        Command::Loss { scans } if !scans.is_empty() => cfg.loss.scans = scans.clone(),
        Command::Brightness(a) => {
            cfg.brightness = Some(brightness_input(cfg.brightness.as_ref(), a)?)
        }
        _ => {}
    }
    Ok(cfg)
}

/// Run one subcommand and write its outputs; returns the output directory.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> CliResult<PathBuf> {
    let start = Instant::now();
    let cfg = resolve_config(cli)?;
    let name = cli.command.name();
    let dir = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("qpm-{name}")));
    let run = Run::new(cfg)?;
    let mut out = OutputDir::create(&dir)?;
    let result = match &cli.command {
        Command::Design => commands::design(&run, &mut out, stdout),
        Command::Jsa => commands::jsa_cmd(&run, &mut out, stdout),
        Command::Tune => commands::tune(&run, &mut out, stdout),
        Command::Sweep => commands::sweep(&run, &mut out, stdout),
        Command::Loss { .. } => commands::loss(&run, &mut out, stdout),
        Command::Brightness(_) => commands::brightness(
            run.config.brightness.as_ref().expect("resolved above"),
            &mut out,
            stdout,
        ),
    };
    // A partially failed loss batch still gets its report and manifest.
    match result {
        Ok(()) | Err(CliError::ScansFailed { .. }) => {
            out.finish(name, &run.config, Some(&run.model_info), start.elapsed())?;
        }
        Err(_) => {}
    }
    result.map(|()| dir)
}
