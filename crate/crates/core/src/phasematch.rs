//! Quasi-phase-matched mismatch Δβ for a cw-pumped process, the poling period
//! that zeroes it at the central frequencies, and its Taylor coefficients.
//!
//! Sign convention: Δβ = β_p(ω_p) − β_s(ω_s) − β_i(ω_i) − 2π/Λ with the
//! detuning Δω = ω_s − Ω_s = −(ω_i − Ω_i) and the pump frequency fixed.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dispersion::{beta_derivative, Dispersion};
use crate::error::{Error, Result};
use crate::optics::{
    omega_from_wavelength_nm, wavelength_nm_from_omega, OpticalField, Polarization,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpmType {
    /// All three fields share one polarization.
    #[serde(rename = "type-0")]
    Type0,
    /// Signal and idler share a polarization orthogonal to the pump.
    #[serde(rename = "type-i")]
    TypeI,
    /// Signal and idler are orthogonally polarized.
    #[serde(rename = "type-ii")]
    TypeII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolarizationAssignment {
    pub pump: Polarization,
    pub signal: Polarization,
    pub idler: Polarization,
}

impl PolarizationAssignment {
    pub fn kind(&self) -> Option<QpmType> {
        if self.signal != self.idler {
            Some(QpmType::TypeII)
        } else if self.pump == self.signal {
            Some(QpmType::Type0)
        } else {
            Some(QpmType::TypeI)
        }
    }
}

impl Default for PolarizationAssignment {
    /// Ordinary pump, extraordinary signal, ordinary idler.
    fn default() -> Self {
        Self {
            pump: Polarization::Ordinary,
            signal: Polarization::Extraordinary,
            idler: Polarization::Ordinary,
        }
    }
}

fn default_expansion_reference() -> f64 {
    24.5
}

/// Geometry and polarization layout of one poled waveguide.
///
/// Missing fields take the [`Default`] values when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveguideSpec {
    pub length_mm: f64,
    pub poling_period_um: f64,
    /// Width label used to pick the model's waveguide correction.
    pub width_um: f64,
    #[serde(default)]
    pub polarizations: PolarizationAssignment,
    /// Declared process type; checked against the polarizations.
    #[serde(default = "default_kind")]
    pub kind: QpmType,
    /// Linear thermal expansion of Λ and L, 1/K. Zero disables expansion.
    #[serde(default)]
    pub thermal_expansion_per_k: f64,
    #[serde(default = "default_expansion_reference")]
    pub expansion_reference_c: f64,
}

fn default_kind() -> QpmType {
    QpmType::TypeII
}

impl Default for WaveguideSpec {
    fn default() -> Self {
        Self {
            length_mm: 40.0,
            poling_period_um: 6.3,
            width_um: 20.0,
            polarizations: PolarizationAssignment::default(),
            kind: QpmType::TypeII,
            thermal_expansion_per_k: 0.0,
            expansion_reference_c: default_expansion_reference(),
        }
    }
}

impl WaveguideSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.length_mm.is_finite() && self.length_mm > 0.0) {
            return Err(Error::config(format!(
                "waveguide length must be > 0, got {} mm",
                self.length_mm
            )));
        }
        if !(self.poling_period_um.is_finite() && self.poling_period_um > 0.0) {
            return Err(Error::config(format!(
                "poling period must be > 0, got {} um",
                self.poling_period_um
            )));
        }
        if !self.thermal_expansion_per_k.is_finite() {
            return Err(Error::config(
                "thermal expansion coefficient must be finite",
            ));
        }
        if self.polarizations.kind() != Some(self.kind) {
            return Err(Error::config(format!(
                "declared {:?} but polarizations are pump={}, signal={}, idler={}",
                self.kind,
                self.polarizations.pump,
                self.polarizations.signal,
                self.polarizations.idler
            )));
        }
        Ok(())
    }

    pub fn with_poling_period(&self, poling_period_um: f64) -> Self {
        Self {
            poling_period_um,
            ..self.clone()
        }
    }

    fn expansion(&self, temperature_c: f64) -> f64 {
        if self.thermal_expansion_per_k == 0.0 {
            1.0
        } else {
            1.0 + self.thermal_expansion_per_k * (temperature_c - self.expansion_reference_c)
        }
    }

    /// Poling period at temperature, m.
    pub fn period_m(&self, temperature_c: f64) -> f64 {
        self.poling_period_um * 1e-6 * self.expansion(temperature_c)
    }

    /// Interaction length at temperature, m.
    pub fn length_m(&self, temperature_c: f64) -> f64 {
        self.length_mm * 1e-3 * self.expansion(temperature_c)
    }

    /// Grating wavenumber 2π/Λ, rad/m.
    pub fn grating_wavenumber(&self, temperature_c: f64) -> f64 {
        2.0 * PI / self.period_m(temperature_c)
    }
}

/// Evaluation point of the mismatch expansion.
///
/// The idler frequency is always derived as Ω_p − Ω_s, so energy
/// conservation holds by construction.
#[derive(Clone)]
pub struct ProcessConfig {
    model: Arc<dyn Dispersion>,
    waveguide: WaveguideSpec,
    pump_omega: f64,
    signal_omega: f64,
    temperature_c: f64,
}

impl fmt::Debug for ProcessConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcessConfig")
            .field("model", &self.model.name())
            .field("waveguide", &self.waveguide)
            .field("pump_nm", &self.pump_wavelength_nm())
            .field("signal_nm", &self.signal_wavelength_nm())
            .field("temperature_c", &self.temperature_c)
            .finish()
    }
}

/// Serializable record of a [`ProcessConfig`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub model: String,
    pub model_version: String,
    pub waveguide: WaveguideSpec,
    pub pump_wavelength_nm: f64,
    pub signal_wavelength_nm: f64,
    pub idler_wavelength_nm: f64,
    pub temperature_c: f64,
}

impl ProcessConfig {
    pub fn new(
        model: Arc<dyn Dispersion>,
        waveguide: WaveguideSpec,
        pump_omega: f64,
        signal_omega: f64,
        temperature_c: f64,
    ) -> Result<Self> {
        waveguide.validate()?;
        if !(pump_omega.is_finite()
            && signal_omega.is_finite()
            && signal_omega > 0.0
            && signal_omega < pump_omega)
        {
            return Err(Error::NonPhysical(format!(
                "signal frequency {signal_omega:e} rad/s must lie between 0 and the pump frequency {pump_omega:e} rad/s"
            )));
        }
        if !temperature_c.is_finite() {
            return Err(Error::config("temperature must be finite"));
        }
        let cfg = Self {
            model,
            waveguide,
            pump_omega,
            signal_omega,
            temperature_c,
        };
        let pols = cfg.waveguide.polarizations;
        for (w, pol) in [
            (cfg.pump_omega, pols.pump),
            (cfg.signal_omega, pols.signal),
            (cfg.idler_omega(), pols.idler),
        ] {
            cfg.model
                .refractive_index(wavelength_nm_from_omega(w), temperature_c, pol)?;
        }
        Ok(cfg)
    }

    pub fn from_wavelengths(
        model: Arc<dyn Dispersion>,
        waveguide: WaveguideSpec,
        pump_nm: f64,
        signal_nm: f64,
        temperature_c: f64,
    ) -> Result<Self> {
        Self::new(
            model,
            waveguide,
            omega_from_wavelength_nm(pump_nm),
            omega_from_wavelength_nm(signal_nm),
            temperature_c,
        )
    }

    pub fn model(&self) -> &Arc<dyn Dispersion> {
        &self.model
    }

    pub fn waveguide(&self) -> &WaveguideSpec {
        &self.waveguide
    }

    pub fn polarizations(&self) -> PolarizationAssignment {
        self.waveguide.polarizations
    }

    pub fn pump_omega(&self) -> f64 {
        self.pump_omega
    }

    pub fn signal_omega(&self) -> f64 {
        self.signal_omega
    }

    pub fn idler_omega(&self) -> f64 {
        self.pump_omega - self.signal_omega
    }

    pub fn temperature_c(&self) -> f64 {
        self.temperature_c
    }

    pub fn pump_wavelength_nm(&self) -> f64 {
        wavelength_nm_from_omega(self.pump_omega)
    }

    pub fn signal_wavelength_nm(&self) -> f64 {
        wavelength_nm_from_omega(self.signal_omega)
    }

    pub fn idler_wavelength_nm(&self) -> f64 {
        wavelength_nm_from_omega(self.idler_omega())
    }

    pub fn with_temperature(&self, temperature_c: f64) -> Result<Self> {
        Self::new(
            self.model.clone(),
            self.waveguide.clone(),
            self.pump_omega,
            self.signal_omega,
            temperature_c,
        )
    }

    pub fn with_pump_wavelength(&self, pump_nm: f64) -> Result<Self> {
        Self::new(
            self.model.clone(),
            self.waveguide.clone(),
            omega_from_wavelength_nm(pump_nm),
            self.signal_omega,
            self.temperature_c,
        )
    }

    pub fn with_poling_period(&self, poling_period_um: f64) -> Result<Self> {
        Self::new(
            self.model.clone(),
            self.waveguide.with_poling_period(poling_period_um),
            self.pump_omega,
            self.signal_omega,
            self.temperature_c,
        )
    }

    pub fn snapshot(&self) -> ConfigSnapshot {
        ConfigSnapshot {
            model: self.model.name().to_string(),
            model_version: self.model.version().to_string(),
            waveguide: self.waveguide.clone(),
            pump_wavelength_nm: self.pump_wavelength_nm(),
            signal_wavelength_nm: self.signal_wavelength_nm(),
            idler_wavelength_nm: self.idler_wavelength_nm(),
            temperature_c: self.temperature_c,
        }
    }

    /// β_p − β_s − β_i at the given signal frequency, without the grating term.
    pub(crate) fn material_mismatch(&self, pump_beta: f64, signal_omega: f64) -> Result<f64> {
        let pols = self.waveguide.polarizations;
        let bs = self
            .model
            .beta(signal_omega, self.temperature_c, pols.signal)?;
        let bi = self.model.beta(
            self.pump_omega - signal_omega,
            self.temperature_c,
            pols.idler,
        )?;
        Ok(pump_beta - bs - bi)
    }

    pub(crate) fn pump_beta(&self) -> Result<f64> {
        self.model.beta(
            self.pump_omega,
            self.temperature_c,
            self.waveguide.polarizations.pump,
        )
    }
}

/// Exact (non-expanded) mismatch at detuning Δω, rad/m.
pub fn delta_beta(config: &ProcessConfig, delta_omega: f64) -> Result<f64> {
    let bp = config.pump_beta()?;
    let material = config.material_mismatch(bp, config.signal_omega + delta_omega)?;
    Ok(material - config.waveguide.grating_wavenumber(config.temperature_c))
}

/// Λ (µm) for a given material mismatch β_p − β_s − β_i in rad/m.
pub fn poling_period_from_mismatch(mismatch: f64) -> Result<f64> {
    if !(mismatch > 0.0 && mismatch.is_finite()) {
        return Err(Error::NonPositiveMismatch { mismatch });
    }
    Ok(2.0 * PI / mismatch * 1e6)
}

/// Poling period (µm) that zeroes the mismatch for the three given fields.
pub fn poling_period_for(
    model: &dyn Dispersion,
    pump: &OpticalField,
    signal: &OpticalField,
    idler: &OpticalField,
    temperature_c: f64,
) -> Result<f64> {
    let bp = model.beta(pump.omega(), temperature_c, pump.polarization)?;
    let bs = model.beta(signal.omega(), temperature_c, signal.polarization)?;
    let bi = model.beta(idler.omega(), temperature_c, idler.polarization)?;
    poling_period_from_mismatch(bp - bs - bi)
}

/// Poling period (µm) that zeroes Δβ⁰ at the config's central frequencies.
///
/// Ignores the config's own Λ and any thermal expansion of it.
pub fn poling_period_for_config(config: &ProcessConfig) -> Result<f64> {
    let bp = config.pump_beta()?;
    poling_period_from_mismatch(config.material_mismatch(bp, config.signal_omega)?)
}

/// Expansion coefficients of Δβ about the central frequencies.
///
/// `kappa_*` and `eta_*` keep the pump-derivative parts; `gv_term` and
/// `gvd_term` are the cw-reduced forms where those parts cancel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorCoefficients {
    /// β_p'(Ω_p) − β_s'(Ω_s), s/m.
    pub kappa_s: f64,
    /// β_p'(Ω_p) − β_i'(Ω_i), s/m.
    pub kappa_i: f64,
    /// β_p''(Ω_p) − β_s''(Ω_s), s²/m.
    pub eta_s: f64,
    /// β_p''(Ω_p) − β_i''(Ω_i), s²/m.
    pub eta_i: f64,
    /// β_p''(Ω_p), s²/m.
    pub eta_p: f64,
    /// −β_s'(Ω_s) + β_i'(Ω_i), s/m.
    pub gv_term: f64,
    /// −½(β_s''(Ω_s) + β_i''(Ω_i)), s²/m.
    pub gvd_term: f64,
    /// Δβ at Δω = 0, rad/m.
    pub delta_beta0: f64,
}

impl TaylorCoefficients {
    /// Second-order polynomial written with the full (pump-inclusive) coefficients.
    pub fn full_mismatch(&self, delta_omega: f64) -> f64 {
        self.delta_beta0
            + (self.kappa_s - self.kappa_i) * delta_omega
            + (0.5 * (self.eta_s + self.eta_i) - self.eta_p) * delta_omega * delta_omega
    }
}

pub fn taylor_coefficients(config: &ProcessConfig) -> Result<TaylorCoefficients> {
    let m = config.model.as_ref();
    let t = config.temperature_c;
    let pols = config.waveguide.polarizations;
    let (wp, ws, wi) = (config.pump_omega, config.signal_omega, config.idler_omega());
    let bp1 = beta_derivative(m, wp, t, pols.pump, 1)?;
    let bp2 = beta_derivative(m, wp, t, pols.pump, 2)?;
    let bs1 = beta_derivative(m, ws, t, pols.signal, 1)?;
    let bs2 = beta_derivative(m, ws, t, pols.signal, 2)?;
    let bi1 = beta_derivative(m, wi, t, pols.idler, 1)?;
    let bi2 = beta_derivative(m, wi, t, pols.idler, 2)?;
    let coeffs = TaylorCoefficients {
        kappa_s: bp1 - bs1,
        kappa_i: bp1 - bi1,
        eta_s: bp2 - bs2,
        eta_i: bp2 - bi2,
        eta_p: bp2,
        gv_term: -bs1 + bi1,
        gvd_term: -0.5 * (bs2 + bi2),
        delta_beta0: delta_beta(config, 0.0)?,
    };
    let all = [
        coeffs.kappa_s,
        coeffs.kappa_i,
        coeffs.eta_s,
        coeffs.eta_i,
        coeffs.eta_p,
        coeffs.gv_term,
        coeffs.gvd_term,
        coeffs.delta_beta0,
    ];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConverged {
            what: "Taylor coefficients".into(),
            residual: f64::NAN,
        });
    }
    Ok(coeffs)
}

/// Second-order cw mismatch Δβ⁰ + gv_term·Δω + gvd_term·Δω².
pub fn taylor_mismatch(coeffs: &TaylorCoefficients, delta_omega: f64) -> f64 {
    coeffs.delta_beta0 + coeffs.gv_term * delta_omega + coeffs.gvd_term * delta_omega * delta_omega
}

/// Smallest C with |Δβ(Δω) − taylor_mismatch(Δω)| ≤ C|Δω|³ over a uniform
/// grid of `points` samples on [−half_span, half_span] (rad/s), s³/m.
///
/// The grid step should stay well above the scale where the cubic remainder
/// meets the rounding floor of β (about 2π·0.01 THz for LN waveguides).
pub fn taylor_remainder_constant(
    config: &ProcessConfig,
    half_span: f64,
    points: usize,
) -> Result<f64> {
    if !(half_span.is_finite() && half_span > 0.0) || points < 2 {
        return Err(Error::config(format!(
            "remainder grid needs a positive half span and at least 2 points (got {half_span}, {points})"
        )));
    }
    let coeffs = taylor_coefficients(config)?;
    let step = 2.0 * half_span / (points - 1) as f64;
    let mut c: f64 = 0.0;
    for k in 0..points {
        let dw = -half_span + step * k as f64;
        if dw.abs() < 0.5 * step {
            continue;
        }
        let remainder = delta_beta(config, dw)? - taylor_mismatch(&coeffs, dw);
        c = c.max((remainder / dw.powi(3)).abs());
    }
    Ok(c)
}

/// Group-velocity term −β_s'(ω_s) + β_i'(ω_p − ω_s), s/m.
pub fn group_velocity_term(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_omega: f64,
    signal_omega: f64,
    temperature_c: f64,
) -> Result<f64> {
    let bs1 = beta_derivative(model, signal_omega, temperature_c, pols.signal, 1)?;
    let bi1 = beta_derivative(
        model,
        pump_omega - signal_omega,
        temperature_c,
        pols.idler,
        1,
    )?;
    Ok(-bs1 + bi1)
}

/// Dispersion term −½(β_s''(ω_s) + β_i''(ω_p − ω_s)), s²/m.
pub fn dispersion_term(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_omega: f64,
    signal_omega: f64,
    temperature_c: f64,
) -> Result<f64> {
    let bs2 = beta_derivative(model, signal_omega, temperature_c, pols.signal, 2)?;
    let bi2 = beta_derivative(
        model,
        pump_omega - signal_omega,
        temperature_c,
        pols.idler,
        2,
    )?;
    Ok(-0.5 * (bs2 + bi2))
}
