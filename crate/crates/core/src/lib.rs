//! Dispersion engineering for quasi-phase-matched parametric down-conversion
//! in poled waveguides: phase matching, joint spectra, working-point search,
//! temperature/pump tuning maps and loss/brightness metrology.
//!
//! ```
//! # fn main() -> qpm_core::Result<()> {
//! use std::sync::Arc;
//! use qpm_core::tuning::bandwidth_report;
//! use qpm_core::{jsa, marginal_spectrum, solve_design_point, Arm, DesignOptions,
//!                DispersionModel, SpectralGrid, WaveguideSpec};
//!
//! let model = Arc::new(DispersionModel::bundled());
//! let wg = WaveguideSpec { poling_period_um: 6.3, ..Default::default() };
//! let wp = solve_design_point(model.clone(), &wg, &DesignOptions::default())?;
//! let cfg = wp.process_config(model, &wg)?;
//! let spectrum = jsa(&cfg, &SpectralGrid::default())?;
//! let signal = marginal_spectrum(&spectrum, Arm::Signal, false)?;
//! assert!(bandwidth_report(&signal, 0.8)?.width_thz > 10.0);
//! # Ok(())
//! # }
//! ```

pub mod dispersion;
pub mod error;
pub mod jsa;
pub mod metrology;
pub mod optics;
pub mod phasematch;
pub mod roots;
pub mod tuning;
pub mod workingpoint;

pub use dispersion::{beta_derivative, Dispersion, DispersionModel};
pub use error::{Error, Result, SolveLevel};
pub use jsa::{
    correlation_time, idler_wavelength_of, jsa, marginal_spectrum, Arm, JsaResult, Marginal,
    SpectralGrid,
};
pub use metrology::{
    brightness_lower_bound, fresnel_reflectivity, fringe_contrast, loss_from_contrast,
    BrightnessInput, BrightnessReport, FringeScan, LossReport,
};
pub use optics::{OpticalField, Polarization};
pub use phasematch::{
    delta_beta, poling_period_for, taylor_coefficients, taylor_mismatch, taylor_remainder_constant,
    PolarizationAssignment, ProcessConfig, QpmType, TaylorCoefficients, WaveguideSpec,
};
pub use tuning::{
    bandwidth_fw_at_fraction, classify_regime, pump_sweep_bandwidth, temperature_map,
    BandwidthReport, Regime, TuningMap,
};
pub use workingpoint::{
    solve_design_point, solve_gv_matched_signal, solve_poling_for_design, DesignOptions, GvBranch,
    WorkingPoint,
};
