//! cw-pump joint spectral amplitude f(Δω) = sinc(ΔβL/2)·e^{iΔβL/2}, its
//! marginal spectra and the Fourier-limited correlation time.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{thz_to_rad_per_s, wavelength_nm_from_omega};
use crate::phasematch::{ConfigSnapshot, ProcessConfig};

/// Uniform, symmetric detuning axis Δω = ω_s − Ω_s (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    half_span: f64,
    points: usize,
}

impl Default for SpectralGrid {
    /// 4097 points over ±2π·40 THz.
    fn default() -> Self {
        Self {
            half_span: thz_to_rad_per_s(40.0),
            points: 4097,
        }
    }
}

impl SpectralGrid {
    pub const MIN_POINTS: usize = 17;

    pub fn new(half_span_rad_s: f64, points: usize) -> Result<Self> {
        if !(half_span_rad_s.is_finite() && half_span_rad_s > 0.0) {
            return Err(Error::config(format!(
                "grid half span must be > 0, got {half_span_rad_s}"
            )));
        }
        if points < Self::MIN_POINTS || points.is_multiple_of(2) {
            return Err(Error::config(format!(
                "grid needs an odd number of points >= {}, got {points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self {
            half_span: half_span_rad_s,
            points,
        })
    }

    pub fn from_thz(half_span_thz: f64, points: usize) -> Result<Self> {
        Self::new(thz_to_rad_per_s(half_span_thz), points)
    }

    /// Same span at twice the resolution.
    pub fn refined(&self) -> Self {
        Self {
            half_span: self.half_span,
            points: 2 * self.points - 1,
        }
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn half_span(&self) -> f64 {
        self.half_span
    }

    pub fn resolution(&self) -> f64 {
        self.half_span / (self.points / 2) as f64
    }

    /// Axis values; index `points/2` is exactly zero and `axis[k] == -axis[n-1-k]`.
    pub fn axis(&self) -> Vec<f64> {
        let mid = (self.points / 2) as i64;
        let step = self.resolution();
        (0..self.points as i64)
            .map(|i| (i - mid) as f64 * step)
            .collect()
    }
}

/// sin(x)/x, with a series near zero that never exceeds 1.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 * (1.0 - x2 / 20.0)
    } else {
        x.sin() / x
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsaResult {
    pub config: ConfigSnapshot,
    pub delta_omega: Vec<f64>,
    /// Exact mismatch Δβ(Δω), rad/m.
    pub delta_beta: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub signal_omega: f64,
    pub idler_omega: f64,
    pub length_m: f64,
}

impl JsaResult {
    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|f| f.norm_sqr()).collect()
    }

    pub fn signal_wavelengths_nm(&self) -> Vec<f64> {
        self.delta_omega
            .iter()
            .map(|d| wavelength_nm_from_omega(self.signal_omega + d))
            .collect()
    }

    pub fn idler_wavelengths_nm(&self) -> Vec<f64> {
        self.delta_omega
            .iter()
            .map(|d| wavelength_nm_from_omega(self.idler_omega - d))
            .collect()
    }

    /// CSV with a header row, one line per grid point in axis order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "delta_omega_rad_s,lambda_s_nm,lambda_i_nm,re_f,im_f,intensity"
        )?;
        for (i, f) in self.amplitude.iter().enumerate() {
            let d = self.delta_omega[i];
            writeln!(
                out,
                "{:e},{},{},{:e},{:e},{:e}",
                d,
                wavelength_nm_from_omega(self.signal_omega + d),
                wavelength_nm_from_omega(self.idler_omega - d),
                f.re,
                f.im,
                f.norm_sqr()
            )?;
        }
        Ok(())
    }
}

/// Evaluate the JSA from the exact mismatch on every grid point.
pub fn jsa(config: &ProcessConfig, grid: &SpectralGrid) -> Result<JsaResult> {
    let axis = grid.axis();
    let pump_beta = config.pump_beta()?;
    let grating = config
        .waveguide()
        .grating_wavenumber(config.temperature_c());
    let length = config.waveguide().length_m(config.temperature_c());
    // Collected per point so the reported error is the first in axis order.
    let delta_beta = axis
        .par_iter()
        .map(|&d| Ok(config.material_mismatch(pump_beta, config.signal_omega() + d)? - grating))
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let amplitude = delta_beta
        .iter()
        .map(|&db| {
            let x = 0.5 * db * length;
            let s = sinc(x);
            Complex64::new(s * x.cos(), s * x.sin())
        })
        .collect();
    Ok(JsaResult {
        config: config.snapshot(),
        delta_omega: axis,
        delta_beta,
        amplitude,
        signal_omega: config.signal_omega(),
        idler_omega: config.idler_omega(),
        length_m: length,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Signal,
    Idler,
}

/// A max-normalized marginal spectrum, ordered by increasing wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginal {
    pub arm: Arm,
    pub wavelength_nm: Vec<f64>,
    /// Optical frequency offset of this arm from its centre, THz (uniform).
    pub frequency_offset_thz: Vec<f64>,
    pub intensity: Vec<f64>,
    /// True when intensities are per unit wavelength rather than per unit frequency.
    pub per_wavelength: bool,
}

impl Marginal {
    pub fn len(&self) -> usize {
        self.intensity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensity.is_empty()
    }

    /// Wavelength of the maximum (first one if several).
    pub fn peak_wavelength_nm(&self) -> f64 {
        let mut best = 0;
        for (i, &v) in self.intensity.iter().enumerate() {
            if v > self.intensity[best] {
                best = i;
            }
        }
        self.wavelength_nm[best]
    }
}

fn normalize(values: &mut [f64]) -> Result<()> {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return Err(Error::Normalization(format!("spectrum maximum is {max}")));
    }
    for v in values.iter_mut() {
        *v /= max;
    }
    Ok(())
}

/// Marginal spectrum of one arm.
///
/// By default the intensity is |f|² per frequency bin, relabelled to vacuum
/// wavelength. With `per_wavelength` set it is multiplied by |dω/dλ| ∝ 1/λ²
/// before normalization, as a wavelength-binned spectrometer would record.
pub fn marginal_spectrum(result: &JsaResult, arm: Arm, per_wavelength: bool) -> Result<Marginal> {
    if result.amplitude.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let n = result.delta_omega.len();
    // Signal wavelength falls with Δω, idler wavelength rises.
    let order: Vec<usize> = match arm {
        Arm::Signal => (0..n).rev().collect(),
        Arm::Idler => (0..n).collect(),
    };
    let mut wavelength_nm = Vec::with_capacity(n);
    let mut frequency_offset_thz = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for &i in &order {
        let d = result.delta_omega[i];
        let (omega, offset) = match arm {
            Arm::Signal => (result.signal_omega + d, d),
            Arm::Idler => (result.idler_omega - d, -d),
        };
        let l = wavelength_nm_from_omega(omega);
        let mut v = result.amplitude[i].norm_sqr();
        if per_wavelength {
            v /= l * l;
        }
        wavelength_nm.push(l);
        frequency_offset_thz.push(offset / (2.0 * PI * 1e12));
        intensity.push(v);
    }
    normalize(&mut intensity)?;
    Ok(Marginal {
        arm,
        wavelength_nm,
        frequency_offset_thz,
        intensity,
        per_wavelength,
    })
}

/// Idler wavelength (nm) fixed by energy conservation with a cw pump.
pub fn idler_wavelength_of(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if !(pump_nm > 0.0 && signal_nm > pump_nm && signal_nm.is_finite()) {
        return Err(Error::NonPhysical(format!(
            "signal {signal_nm} nm must be longer than pump {pump_nm} nm"
        )));
    }
    Ok(1.0 / (1.0 / pump_nm - 1.0 / signal_nm))
}

/// Minimum zero-padding factor of the correlation transform.
pub const CORRELATION_PADDING: usize = 16;

/// Fourier-limited correlation time (fs): FWHM of |g(τ)|², with g the
/// transform of √intensity under a flat spectral phase.
///
/// `intensity` must be sampled on a uniform frequency grid of spacing `step_hz`.
pub fn correlation_time_uniform(intensity: &[f64], step_hz: f64) -> Result<f64> {
    if intensity.iter().filter(|&&v| v > 0.0).count() < 3 {
        return Err(Error::DegenerateSpectrum(
            "fewer than three nonzero samples".into(),
        ));
    }
    if intensity.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::DegenerateSpectrum(
            "negative or non-finite intensity".into(),
        ));
    }
    if !(step_hz > 0.0 && step_hz.is_finite()) {
        return Err(Error::DegenerateSpectrum(format!(
            "frequency step {step_hz} Hz"
        )));
    }
    let len = (intensity.len() * CORRELATION_PADDING).next_power_of_two();
    let mut buf: Vec<Complex64> = intensity
        .iter()
        .map(|v| Complex64::new(v.sqrt(), 0.0))
        .collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let power: Vec<f64> = buf.iter().map(|c| c.norm_sqr()).collect();
    let half = 0.5 * power[0];
    // |g|² is even in τ with its maximum at τ = 0 for a real, non-negative amplitude.
    let dt = 1.0 / (len as f64 * step_hz);
    for k in 1..len / 2 {
        if power[k] <= half {
            let frac = (power[k - 1] - half) / (power[k - 1] - power[k]);
            return Ok(2.0 * (k as f64 - 1.0 + frac) * dt * 1e15);
        }
    }
    Err(Error::DegenerateSpectrum(
        "correlation never falls to half maximum".into(),
    ))
}

/// Correlation time (fs) of a marginal on its native uniform frequency grid.
pub fn correlation_time(marginal: &Marginal) -> Result<f64> {
    let f = &marginal.frequency_offset_thz;
    if f.len() < 3 {
        return Err(Error::DegenerateSpectrum("fewer than three samples".into()));
    }
    let step_hz = (f[f.len() - 1] - f[0]).abs() / (f.len() - 1) as f64 * 1e12;
    correlation_time_uniform(&marginal.intensity, step_hz)
}
