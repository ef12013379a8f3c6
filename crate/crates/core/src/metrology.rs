//! Measurement analysis: propagation loss from low-finesse Fabry-Pérot
//! fringes between the waveguide facets, and pair-source brightness bounds.
//!
//! For equal facet reflectivities R and power loss α the transmission is
//! Airy-shaped, T ∝ 1/((1 − R̃)² + 4R̃ sin²φ) with R̃ = R·exp(−αL), so the
//! fringe contrast K = (T_max − T_min)/(T_max + T_min) equals 2R̃/(1 + R̃²).
//! Inverting gives R̃ = (1 − √(1 − K²))/K and α[dB/cm] = 10/(L ln 10)·ln(R/R̃).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::Dispersion;
use crate::error::{Error, Result};
use crate::optics::Polarization;

/// Relative slack on the lossless contrast bound before a scan counts as gain.
pub const LOSSLESS_BOUND_TOLERANCE: f64 = 1e-9;

/// A transmission scan across at least one Fabry-Pérot fringe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeScan {
    /// Temperature or wavelength detuning, strictly monotonic, arbitrary units.
    pub axis: Vec<f64>,
    /// Transmitted power, arbitrary linear units.
    pub power: Vec<f64>,
    pub reflectivity: f64,
    pub length_cm: f64,
}

impl FringeScan {
    pub fn new(axis: Vec<f64>, power: Vec<f64>, reflectivity: f64, length_cm: f64) -> Result<Self> {
        let scan = Self {
            axis,
            power,
            reflectivity,
            length_cm,
        };
        scan.validate()?;
        Ok(scan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis.len() != self.power.len() {
            return Err(Error::config(format!(
                "fringe scan has {} axis samples but {} power samples",
                self.axis.len(),
                self.power.len()
            )));
        }
        if self.axis.len() < 3 {
            return Err(Error::NoFringeFound(format!(
                "only {} samples",
                self.axis.len()
            )));
        }
        let increasing = self.axis[1] > self.axis[0];
        if !self.axis.windows(2).all(|w| {
            w[0].is_finite() && w[1].is_finite() && (w[1] > w[0]) == increasing && w[1] != w[0]
        }) {
            return Err(Error::config(
                "fringe scan axis must be finite and strictly monotonic",
            ));
        }
        if let Some(p) = self.power.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::config(format!(
                "fringe scan power sample {p} is negative or not finite"
            )));
        }
        check_reflectivity(self.reflectivity)?;
        check_length(self.length_cm)
    }
}

fn check_reflectivity(r: f64) -> Result<()> {
    if r > 0.0 && r < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidReflectivity(r))
    }
}

fn check_length(l: f64) -> Result<()> {
    if l.is_finite() && l > 0.0 {
        Ok(())
    } else {
        Err(Error::config(format!(
            "waveguide length {l} cm must be positive"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

/// A sub-sample extremum from a parabola through three neighbouring samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub position: f64,
    pub value: f64,
}

/// Vertex of the parabola through three points with distinct abscissae.
pub fn parabola_vertex(x: [f64; 3], y: [f64; 3]) -> (f64, f64) {
    let (d1, d2) = (x[0] - x[1], x[2] - x[1]);
    let (s1, s2) = ((y[0] - y[1]) / d1, (y[2] - y[1]) / d2);
    // y = y1 + b (x − x1) + a (x − x1)²
    let a = (s1 - s2) / (d1 - d2);
    let b = s1 - a * d1;
    if a == 0.0 {
        return (x[1], y[1]);
    }
    let u = (-b / (2.0 * a)).clamp(d1.min(d2), d1.max(d2));
    (x[1] + u, y[1] + b * u + a * u * u)
}

/// Interior extrema of the scan, alternating between maxima and minima.
pub fn fringe_extrema(scan: &FringeScan) -> Result<Vec<Extremum>> {
    scan.validate()?;
    let p = &scan.power;
    let n = p.len();
    let mut out: Vec<Extremum> = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        // Collapse plateaus so that a flat top is one extremum.
        let mut j = i;
        while j + 1 < n - 1 && p[j + 1] == p[i] {
            j += 1;
        }
        let (before, after) = (p[i - 1], p[j + 1]);
        let kind = if p[i] > before && p[i] > after {
            Some(ExtremumKind::Maximum)
        } else if p[i] < before && p[i] < after {
            Some(ExtremumKind::Minimum)
        } else {
            None
        };
        if let Some(kind) = kind {
            let (position, value) = if i == j {
                parabola_vertex(
                    [scan.axis[i - 1], scan.axis[i], scan.axis[i + 1]],
                    [before, p[i], after],
                )
            } else {
                (0.5 * (scan.axis[i] + scan.axis[j]), p[i])
            };
            let e = Extremum {
                kind,
                position,
                value,
            };
            match out.last_mut() {
                // Keep the stronger of two consecutive extrema of one kind.
                Some(last) if last.kind == kind => {
                    let better = match kind {
                        ExtremumKind::Maximum => e.value > last.value,
                        ExtremumKind::Minimum => e.value < last.value,
                    };
                    if better {
                        *last = e;
                    }
                }
                _ => out.push(e),
            }
        }
        i = j + 1;
    }
    Ok(out)
}

/// Fringe contrast K from the mean interpolated maximum and minimum.
///
/// A constant scan has K = 0.
pub fn fringe_contrast(scan: &FringeScan) -> Result<f64> {
    let extrema = fringe_extrema(scan)?;
    let (lo, hi) = scan
        .power
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &p| {
            (a.min(p), b.max(p))
        });
    if hi > 0.0 && hi == lo {
        return Ok(0.0);
    }
    let mean = |kind: ExtremumKind| -> Option<f64> {
        let v: Vec<f64> = extrema
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| e.value)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    };
    let (Some(i_max), Some(i_min)) = (mean(ExtremumKind::Maximum), mean(ExtremumKind::Minimum))
    else {
        return Err(Error::NoFringeFound(format!(
            "{} interior extrema; need a maximum and a minimum",
            extrema.len()
        )));
    };
    let i_min = i_min.max(0.0);
    if i_max + i_min <= 0.0 {
        return Err(Error::NoFringeFound("scan carries no power".into()));
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

/// Largest contrast a lossless cavity with facet reflectivity `r` can show.
pub fn lossless_contrast(r: f64) -> f64 {
    2.0 * r / (1.0 + r * r)
}

/// Effective round-trip reflectivity R̃ that produces contrast `k`.
pub fn effective_reflectivity(k: f64) -> Result<f64> {
    if !(k > 0.0 && k <= 1.0) {
        return Err(Error::InvalidContrast(k));
    }
    // Same as (1 − √(1 − K²))/K without the cancellation at small K.
    Ok(k / (1.0 + (1.0 - k * k).sqrt()))
}

/// Propagation loss in dB/cm from fringe contrast, facet reflectivity and length.
pub fn loss_from_contrast(contrast: f64, reflectivity: f64, length_cm: f64) -> Result<f64> {
    check_reflectivity(reflectivity)?;
    check_length(length_cm)?;
    let bound = lossless_contrast(reflectivity);
    if contrast.is_finite() && contrast > bound * (1.0 + LOSSLESS_BOUND_TOLERANCE) {
        return Err(Error::GainImplied {
            contrast,
            bound,
            reflectivity,
        });
    }
    let r_eff = effective_reflectivity(contrast)?;
    if r_eff >= reflectivity {
        return Ok(0.0);
    }
    Ok(10.0 / (length_cm * std::f64::consts::LN_10) * (reflectivity / r_eff).ln())
}

/// Normal-incidence power reflectivity of an index-n to air facet.
pub fn fresnel_reflectivity(n: f64) -> Result<f64> {
    if !(n.is_finite() && n >= 1.0) {
        return Err(Error::InvalidIndex(n));
    }
    Ok(((n - 1.0) / (n + 1.0)).powi(2))
}

/// Facet reflectivity from the model index at a probe wavelength.
pub fn facet_reflectivity(
    model: &dyn Dispersion,
    polarization: Polarization,
    wavelength_nm: f64,
    temperature_c: f64,
) -> Result<f64> {
    fresnel_reflectivity(model.refractive_index(wavelength_nm, temperature_c, polarization)?)
}

/// One row of a per-waveguide loss table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub waveguide_id: String,
    pub contrast: Option<f64>,
    pub reflectivity: f64,
    pub loss_db_per_cm: Option<f64>,
    /// `at_lossless_bound`, or the error that stopped the analysis.
    pub flags: Vec<String>,
}

impl LossReport {
    pub fn is_ok(&self) -> bool {
        self.loss_db_per_cm.is_some()
    }
}

pub fn analyze_scan(waveguide_id: &str, scan: &FringeScan) -> LossReport {
    let mut report = LossReport {
        waveguide_id: waveguide_id.to_string(),
        contrast: None,
        reflectivity: scan.reflectivity,
        loss_db_per_cm: None,
        flags: Vec::new(),
    };
    let k = match fringe_contrast(scan) {
        Ok(k) => k,
        Err(e) => {
            report.flags.push(error_flag(&e).to_string());
            return report;
        }
    };
    report.contrast = Some(k);
    match loss_from_contrast(k, scan.reflectivity, scan.length_cm) {
        Ok(a) => {
            if effective_reflectivity(k).is_ok_and(|r| r >= scan.reflectivity) {
                report.flags.push("at_lossless_bound".into());
            }
            report.loss_db_per_cm = Some(a);
        }
        Err(e) => report.flags.push(error_flag(&e).to_string()),
    }
    report
}

fn error_flag(e: &Error) -> &'static str {
    match e {
        Error::NoFringeFound(_) => "no_fringe_found",
        Error::GainImplied { .. } => "gain_implied",
        Error::InvalidContrast(_) => "invalid_contrast",
        Error::InvalidReflectivity(_) => "invalid_reflectivity",
        _ => "invalid_scan",
    }
}

/// Analyze many scans in parallel; output order follows the input.
pub fn analyze_batch(scans: &[(String, FringeScan)]) -> Vec<LossReport> {
    scans
        .par_iter()
        .map(|(id, s)| analyze_scan(id, s))
        .collect()
}

/// Count rates behind a brightness estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BrightnessInput {
    pub detected_rate_cps: f64,
    #[serde(default)]
    pub background_rate_cps: f64,
    pub pump_power_mw: f64,
    pub bandwidth_ghz: f64,
    /// Collection efficiency in (0, 1]; only used for the corrected estimate.
    #[serde(default)]
    pub coupling_efficiency: Option<f64>,
    /// Transfers spectrograph counts to detector counts.
    #[serde(default = "unit")]
    pub calibration_scale: f64,
}

fn unit() -> f64 {
    1.0
}

impl BrightnessInput {
    pub fn new(
        detected_rate_cps: f64,
        background_rate_cps: f64,
        pump_power_mw: f64,
        bandwidth_ghz: f64,
    ) -> Self {
        Self {
            detected_rate_cps,
            background_rate_cps,
            pump_power_mw,
            bandwidth_ghz,
            coupling_efficiency: None,
            calibration_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |v: f64, what: &str| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!(
                    "{what} = {v} must be finite and non-negative"
                )))
            }
        };
        finite_nonneg(self.detected_rate_cps, "detected_rate_cps")?;
        finite_nonneg(self.background_rate_cps, "background_rate_cps")?;
        for (v, what) in [
            (self.pump_power_mw, "pump_power_mw"),
            (self.bandwidth_ghz, "bandwidth_ghz"),
            (self.calibration_scale, "calibration_scale"),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{what} = {v} must be positive")));
            }
        }
        if let Some(eta) = self.coupling_efficiency {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::config(format!(
                    "coupling_efficiency = {eta} must lie in (0, 1]"
                )));
            }
        }
        if self.detected_rate_cps < self.background_rate_cps {
            return Err(Error::NegativeNetRate {
                detected: self.detected_rate_cps,
                background: self.background_rate_cps,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrightnessReport {
    pub net_rate_cps: f64,
    /// counts/(s·mW·GHz), no efficiency correction.
    pub lower_bound: f64,
    /// Lower bound divided by the coupling efficiency; an estimate, not a bound.
    pub efficiency_corrected_estimate: Option<f64>,
    pub coupling_efficiency: Option<f64>,
}

pub fn brightness_lower_bound(input: &BrightnessInput) -> Result<BrightnessReport> {
    input.validate()?;
    let net = (input.detected_rate_cps - input.background_rate_cps) * input.calibration_scale;
    let lower_bound = net / (input.pump_power_mw * input.bandwidth_ghz);
    Ok(BrightnessReport {
        net_rate_cps: net,
        lower_bound,
        efficiency_corrected_estimate: input.coupling_efficiency.map(|eta| lower_bound / eta),
        coupling_efficiency: input.coupling_efficiency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Airy transmission of a lossy symmetric cavity.
    fn airy(r: f64, alpha_db_per_cm: f64, length_cm: f64, phase: f64) -> f64 {
        let r_eff = r * 10f64.powf(-alpha_db_per_cm * length_cm / 10.0);
        let s = phase.sin();
        1.0 / ((1.0 - r_eff).powi(2) + 4.0 * r_eff * s * s)
    }

    fn airy_scan(
        r: f64,
        alpha: f64,
        length_cm: f64,
        fringes: f64,
        per_fringe: usize,
    ) -> FringeScan {
        let n = (fringes * per_fringe as f64) as usize + 1;
        // Phase offset keeps the extrema off the samples.
        let axis: Vec<f64> = (0..n).map(|i| i as f64 / per_fringe as f64).collect();
        let power = axis
            .iter()
            .map(|x| airy(r, alpha, length_cm, PI * x + 0.3719))
            .collect();
        FringeScan::new(axis, power, r, length_cm).unwrap()
    }

    #[test]
    fn fresnel_values() {
        assert_eq!(fresnel_reflectivity(1.0).unwrap(), 0.0);
        assert_eq!(fresnel_reflectivity(3.0).unwrap(), 0.25);
        assert!((fresnel_reflectivity(2.2).unwrap() - 0.140625).abs() < 1e-15);
        assert!(matches!(
            fresnel_reflectivity(0.9),
            Err(Error::InvalidIndex(_))
        ));
        assert!(matches!(
            fresnel_reflectivity(f64::NAN),
            Err(Error::InvalidIndex(_))
        ));
    }

    #[test]
    fn contrast_limits() {
        let axis: Vec<f64> = (0..50).map(f64::from).collect();
        let flat = FringeScan::new(axis.clone(), vec![2.0; 50], 0.14, 4.0).unwrap();
        assert_eq!(fringe_contrast(&flat).unwrap(), 0.0);
        let full: Vec<f64> = axis.iter().map(|x| (0.2 * x).sin().powi(2)).collect();
        let k = fringe_contrast(&FringeScan::new(axis.clone(), full, 0.14, 4.0).unwrap()).unwrap();
        assert!((k - 1.0).abs() < 1e-3, "{k}");
        let ramp = FringeScan::new(axis.clone(), axis.clone(), 0.14, 4.0).unwrap();
        assert!(matches!(
            fringe_contrast(&ramp),
            Err(Error::NoFringeFound(_))
        ));
    }

    #[test]
    fn airy_contrast_matches_closed_form() {
        // Lossless facets with R = 0.1: K = 0.2/1.01.
        let scan = airy_scan(0.1, 0.0, 1.0, 3.0, 40);
        let k = fringe_contrast(&scan).unwrap();
        assert!((k - 0.2 / 1.01).abs() < 1e-5 * k, "{k}");
    }

    #[test]
    fn coarse_sampling_is_rescued_by_interpolation() {
        let scan = airy_scan(0.14, 0.2, 4.0, 4.0, 12);
        let k = fringe_contrast(&scan).unwrap();
        let raw_max = scan.power.iter().cloned().fold(0.0, f64::max);
        let raw_min = scan.power.iter().cloned().fold(f64::INFINITY, f64::min);
        let raw = (raw_max - raw_min) / (raw_max + raw_min);
        let r_eff = 0.14 * 10f64.powf(-0.08);
        let exact = lossless_contrast(r_eff);
        assert!((k - exact).abs() < 0.1 * (raw - exact).abs());
        assert!((k - exact).abs() / exact < 5e-3);
    }

    #[test]
    fn loss_at_bound_and_gain() {
        let r = 0.14;
        assert_eq!(
            loss_from_contrast(lossless_contrast(r), r, 4.0).unwrap(),
            0.0
        );
        assert!(matches!(
            loss_from_contrast(0.9, r, 4.0),
            Err(Error::GainImplied { .. })
        ));
        assert!(matches!(
            loss_from_contrast(0.1, 1.0, 4.0),
            Err(Error::InvalidReflectivity(_))
        ));
        assert!(matches!(
            loss_from_contrast(0.1, 0.0, 4.0),
            Err(Error::InvalidReflectivity(_))
        ));
        assert!(matches!(
            loss_from_contrast(0.0, r, 4.0),
            Err(Error::InvalidContrast(_))
        ));
    }

    #[test]
    fn paper_scale_case() {
        let (r, l, alpha) = (0.1406, 4.0, 0.2);
        let scan = airy_scan(r, alpha, l, 5.0, 64);
        let k = fringe_contrast(&scan).unwrap();
        let r_eff = r * 10f64.powf(-alpha * l / 10.0);
        assert!((k - 2.0 * r_eff / (1.0 + r_eff * r_eff)).abs() < 1e-6);
        let a = loss_from_contrast(k, r, l).unwrap();
        assert!((a - alpha).abs() / alpha < 0.01, "{a}");
    }

    #[test]
    fn round_trip_grid() {
        for alpha in [0.05, 0.1, 0.2, 0.5] {
            for r in [0.1, 0.14, 0.2] {
                for l in [2.0, 4.0, 8.0] {
                    let scan = airy_scan(r, alpha, l, 4.0, 50);
                    let a = loss_from_contrast(fringe_contrast(&scan).unwrap(), r, l).unwrap();
                    assert!(
                        (a - alpha).abs() / alpha < 0.01,
                        "alpha {alpha} R {r} L {l}: {a}"
                    );
                }
            }
        }
    }

    #[test]
    fn batch_preserves_order_and_flags() {
        let good = airy_scan(0.14, 0.1, 4.0, 3.0, 40);
        let axis: Vec<f64> = (0..10).map(f64::from).collect();
        let ramp = FringeScan::new(axis.clone(), axis, 0.14, 4.0).unwrap();
        let out = analyze_batch(&[("a".into(), good), ("b".into(), ramp)]);
        assert_eq!(out[0].waveguide_id, "a");
        assert!(out[0].is_ok());
        assert_eq!(out[1].flags, vec!["no_fringe_found".to_string()]);
    }

    #[test]
    fn brightness_arithmetic() {
        let mut b = BrightnessInput::new(1.25e8, 0.0, 1.0, 25_000.0);
        assert_eq!(brightness_lower_bound(&b).unwrap().lower_bound, 5.0e3);
        b.coupling_efficiency = Some(0.2);
        let r = brightness_lower_bound(&b).unwrap();
        assert_eq!(r.lower_bound, 5.0e3);
        assert_eq!(r.efficiency_corrected_estimate, Some(2.5e4));
        let same = BrightnessInput::new(10.0, 10.0, 1.0, 1.0);
        assert_eq!(brightness_lower_bound(&same).unwrap().lower_bound, 0.0);
        let neg = BrightnessInput::new(1.0, 2.0, 1.0, 1.0);
        assert!(matches!(
            brightness_lower_bound(&neg),
            Err(Error::NegativeNetRate { .. })
        ));
        let bad = BrightnessInput::new(1.0, 0.0, 0.0, 1.0);
        assert!(matches!(
            brightness_lower_bound(&bad),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn vertex_of_exact_parabola() {
        let f = |x: f64| 3.0 - 2.0 * (x - 0.37).powi(2);
        let (x, y) = parabola_vertex([0.0, 0.5, 1.3], [f(0.0), f(0.5), f(1.3)]);
        assert!((x - 0.37).abs() < 1e-12 && (y - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn loss_decreases_with_contrast(r in 0.05f64..0.3, l in 0.5f64..10.0, a in 0.01f64..0.99, b in 0.01f64..0.99) {
            let bound = lossless_contrast(r);
            let (ka, kb) = (a * bound, b * bound);
            prop_assume!(ka < kb);
            prop_assert!(loss_from_contrast(ka, r, l).unwrap() >= loss_from_contrast(kb, r, l).unwrap());
        }

        #[test]
        fn brightness_is_linear(net in 0.0f64..1e9, p in 0.01f64..100.0, bw in 1.0f64..1e5, s in 0.1f64..10.0) {
            let base = brightness_lower_bound(&BrightnessInput::new(net, 0.0, p, bw)).unwrap().lower_bound;
            let scaled = brightness_lower_bound(&BrightnessInput::new(net * s, 0.0, p, bw)).unwrap().lower_bound;
            let more_power = brightness_lower_bound(&BrightnessInput::new(net, 0.0, p * s, bw)).unwrap().lower_bound;
            let more_bw = brightness_lower_bound(&BrightnessInput::new(net, 0.0, p, bw * s)).unwrap().lower_bound;
            let tol = 1e-12 * base.abs().max(1e-300);
            prop_assert!((scaled - s * base).abs() <= tol * s.max(1.0));
            prop_assert!((more_power - base / s).abs() <= tol);
            prop_assert!((more_bw - base / s).abs() <= tol);
        }

        #[test]
        fn contrast_inversion_round_trip(r_eff in 1e-4f64..0.99) {
            let k = lossless_contrast(r_eff);
            prop_assert!((effective_reflectivity(k).unwrap() - r_eff).abs() <= 1e-12);
        }
    }
}
