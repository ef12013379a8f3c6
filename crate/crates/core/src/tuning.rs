//! Temperature and pump tuning maps of the signal marginal, FW80 bandwidth
//! extraction and classification of the tuning behaviour around a design pump.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jsa::{jsa, marginal_spectrum, Arm, Marginal, SpectralGrid};
use crate::phasematch::ProcessConfig;

/// Height band used for the width uncertainty: widths at fraction ± this value.
pub const UNCERTAINTY_BAND: f64 = 0.05;

/// Contiguous superlevel set around the global maximum of a sampled curve.
///
/// Crossing positions are fractional sample indices, linearly interpolated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelInterval {
    pub peak: usize,
    pub left: f64,
    pub right: f64,
    /// A sample outside the interval also reaches the level.
    pub side_lobe: bool,
    /// The interval runs into an end of the data.
    pub truncated: bool,
}

fn check_fraction(fraction: f64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::FractionOutOfRange(fraction));
    }
    Ok(())
}

fn global_max(values: &[f64]) -> Result<(usize, f64)> {
    if values.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::DegenerateSpectrum(format!(
                "non-finite sample at index {i}"
            )));
        }
        if v > values[best] {
            best = i;
        }
    }
    if values[best] <= 0.0 {
        return Err(Error::DegenerateSpectrum("maximum is not positive".into()));
    }
    Ok((best, values[best]))
}

pub fn level_interval(values: &[f64], fraction: f64) -> Result<LevelInterval> {
    check_fraction(fraction)?;
    let (peak, max) = global_max(values)?;
    let level = fraction * max;
    let n = values.len();
    let mut truncated = false;
    let mut l = peak;
    while l > 0 && values[l - 1] >= level {
        l -= 1;
    }
    let left = if l == 0 {
        truncated = true;
        0.0
    } else {
        let (a, b) = (values[l - 1], values[l]);
        (l - 1) as f64 + (level - a) / (b - a)
    };
    let mut r = peak;
    while r + 1 < n && values[r + 1] >= level {
        r += 1;
    }
    let right = if r + 1 == n {
        truncated = true;
        (n - 1) as f64
    } else {
        let (a, b) = (values[r], values[r + 1]);
        r as f64 + (a - level) / (a - b)
    };
    let side_lobe = values
        .iter()
        .enumerate()
        .any(|(i, &v)| (i < l || i > r) && v >= level);
    Ok(LevelInterval {
        peak,
        left,
        right,
        side_lobe,
        truncated,
    })
}

/// Linear interpolation of `axis` at a fractional index.
pub fn interpolate_axis(axis: &[f64], position: f64) -> f64 {
    let i = (position.floor() as usize).min(axis.len() - 1);
    if i + 1 >= axis.len() {
        return axis[axis.len() - 1];
    }
    let t = position - i as f64;
    axis[i] + t * (axis[i + 1] - axis[i])
}

/// Full width of a curve at `fraction` of its maximum, in the units of `axis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelWidth {
    pub width: f64,
    pub lower: f64,
    pub upper: f64,
    pub side_lobe: bool,
    /// Half the spread of the widths at fraction ± 0.05; zero if that band leaves (0, 1).
    pub uncertainty: f64,
}

fn width_on(axis: &[f64], iv: &LevelInterval) -> (f64, f64, f64) {
    let a = interpolate_axis(axis, iv.left);
    let b = interpolate_axis(axis, iv.right);
    ((b - a).abs(), a.min(b), a.max(b))
}

/// Width at `fraction` of the maximum of an arbitrary sampled curve.
///
/// Works on unnormalized data; only the ratio to the maximum matters.
pub fn bandwidth_fw_at_fraction(axis: &[f64], values: &[f64], fraction: f64) -> Result<LevelWidth> {
    if axis.len() != values.len() {
        return Err(Error::DegenerateSpectrum(format!(
            "axis has {} samples, values {}",
            axis.len(),
            values.len()
        )));
    }
    let iv = level_interval(values, fraction)?;
    let (width, lower, upper) = width_on(axis, &iv);
    let (lo_f, hi_f) = (fraction - UNCERTAINTY_BAND, fraction + UNCERTAINTY_BAND);
    let uncertainty = if lo_f > 0.0 && hi_f < 1.0 {
        let w_lo = width_on(axis, &level_interval(values, lo_f)?).0;
        let w_hi = width_on(axis, &level_interval(values, hi_f)?).0;
        0.5 * (w_lo - w_hi).abs()
    } else {
        0.0
    };
    Ok(LevelWidth {
        width,
        lower,
        upper,
        side_lobe: iv.side_lobe,
        uncertainty,
    })
}

/// Indices of the local minima on either side of the global maximum (or the ends).
pub fn main_lobe_bounds(values: &[f64]) -> Result<(usize, usize)> {
    let (peak, _) = global_max(values)?;
    let mut l = peak;
    while l > 0 && values[l - 1] <= values[l] {
        l -= 1;
    }
    let mut r = peak;
    while r + 1 < values.len() && values[r + 1] <= values[r] {
        r += 1;
    }
    Ok((l, r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthReport {
    pub fraction: f64,
    /// Full width at `fraction` of the maximum, optical frequency, THz.
    pub width_thz: f64,
    pub uncertainty_thz: f64,
    /// Wavelength interval over which the main lobe stays above `fraction`, nm.
    pub level_interval_nm: (f64, f64),
    /// Span between the minima that enclose the main lobe, nm.
    pub main_lobe_nm: (f64, f64),
    pub side_lobe: bool,
    pub peak_wavelength_nm: f64,
}

impl BandwidthReport {
    pub fn main_lobe_span_nm(&self) -> f64 {
        self.main_lobe_nm.1 - self.main_lobe_nm.0
    }
}

/// FW80-style report for a marginal; the width is measured in frequency.
pub fn bandwidth_report(marginal: &Marginal, fraction: f64) -> Result<BandwidthReport> {
    let w = bandwidth_fw_at_fraction(
        &marginal.frequency_offset_thz,
        &marginal.intensity,
        fraction,
    )?;
    let iv = level_interval(&marginal.intensity, fraction)?;
    let a = interpolate_axis(&marginal.wavelength_nm, iv.left);
    let b = interpolate_axis(&marginal.wavelength_nm, iv.right);
    let (l, r) = main_lobe_bounds(&marginal.intensity)?;
    Ok(BandwidthReport {
        fraction,
        width_thz: w.width,
        uncertainty_thz: w.uncertainty,
        level_interval_nm: (a.min(b), a.max(b)),
        main_lobe_nm: (marginal.wavelength_nm[l], marginal.wavelength_nm[r]),
        side_lobe: w.side_lobe,
        peak_wavelength_nm: marginal.wavelength_nm[iv.peak],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuningParameter {
    TemperatureC,
    PumpWavelengthNm,
}

impl TuningParameter {
    pub fn label(self) -> &'static str {
        match self {
            TuningParameter::TemperatureC => "temperature_c",
            TuningParameter::PumpWavelengthNm => "pump_wavelength_nm",
        }
    }
}

/// Signal marginals stacked along a tuning parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningMap {
    pub parameter: TuningParameter,
    pub parameter_values: Vec<f64>,
    /// Signal wavelength axis shared by every row, increasing, nm.
    pub wavelength_nm: Vec<f64>,
    /// Max-normalized rows; `None` where the model was out of range.
    pub rows: Vec<Option<Vec<f64>>>,
    pub reports: Vec<Option<BandwidthReport>>,
    /// Row maximum of |f|² before normalization; 1 when the row is phase
    /// matched somewhere on the grid, small for off-resonant tails.
    pub peak_intensity: Vec<Option<f64>>,
    pub fraction: f64,
}

impl TuningMap {
    pub fn present(&self) -> impl Iterator<Item = (usize, &Vec<f64>, &BandwidthReport)> {
        self.rows
            .iter()
            .zip(&self.reports)
            .enumerate()
            .filter_map(|(i, (r, b))| Some((i, r.as_ref()?, b.as_ref()?)))
    }

    pub fn bandwidths_thz(&self) -> Vec<Option<f64>> {
        self.reports
            .iter()
            .map(|r| r.as_ref().map(|r| r.width_thz))
            .collect()
    }

    /// Parameter value and report of the broadest row (first on ties).
    pub fn broadest(&self) -> Option<(f64, &BandwidthReport)> {
        let mut best: Option<(usize, &BandwidthReport)> = None;
        for (i, _, r) in self.present() {
            if best.is_none_or(|(_, b)| r.width_thz > b.width_thz) {
                best = Some((i, r));
            }
        }
        best.map(|(i, r)| (self.parameter_values[i], r))
    }

    /// Matrix CSV: first row the wavelength axis, first column the parameter.
    /// Absent rows have empty cells.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "{}\\lambda_s_nm", self.parameter.label())?;
        for l in &self.wavelength_nm {
            write!(out, ",{l}")?;
        }
        writeln!(out)?;
        for (p, row) in self.parameter_values.iter().zip(&self.rows) {
            write!(out, "{p}")?;
            match row {
                Some(r) => {
                    for v in r {
                        write!(out, ",{v:e}")?;
                    }
                }
                None => {
                    for _ in &self.wavelength_nm {
                        write!(out, ",")?;
                    }
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Companion JSON: axis metadata and the per-row reports.
    pub fn reports_json(&self) -> serde_json::Value {
        serde_json::json!({
            "parameter": self.parameter.label(),
            "parameter_values": self.parameter_values,
            "fraction": self.fraction,
            "reports": self.reports,
        })
    }
}

fn evenly_spaced(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 {
        return Err(Error::config(format!("need at least 2 steps, got {steps}")));
    }
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::config(format!("empty range [{lo}, {hi}]")));
    }
    Ok((0..steps)
        .map(|i| {
            if i + 1 == steps {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (steps - 1) as f64
            }
        })
        .collect())
}

fn is_validity_error(e: &Error) -> bool {
    matches!(
        e,
        Error::OutOfValidityRange { .. } | Error::StencilOutOfRange { .. }
    )
}

type Row = (Marginal, BandwidthReport, f64);

fn row_for(
    config: Result<ProcessConfig>,
    grid: &SpectralGrid,
    fraction: f64,
) -> Result<Option<Row>> {
    let run = || -> Result<Row> {
        let r = jsa(&config?, grid)?;
        let peak = r.intensity().into_iter().fold(0.0, f64::max);
        let m = marginal_spectrum(&r, Arm::Signal, false)?;
        let b = bandwidth_report(&m, fraction)?;
        Ok((m, b, peak))
    };
    match run() {
        Ok(v) => Ok(Some(v)),
        Err(e) if is_validity_error(&e) => Ok(None),
        Err(e) => Err(e),
    }
}

fn assemble(
    parameter: TuningParameter,
    values: Vec<f64>,
    rows: Vec<Option<Row>>,
    template_axis: Vec<f64>,
    fraction: f64,
) -> TuningMap {
    let mut map = TuningMap {
        parameter,
        parameter_values: values,
        wavelength_nm: template_axis,
        rows: Vec::with_capacity(rows.len()),
        reports: Vec::with_capacity(rows.len()),
        peak_intensity: Vec::with_capacity(rows.len()),
        fraction,
    };
    for r in rows {
        match r {
            Some((m, b, p)) => {
                map.rows.push(Some(m.intensity));
                map.reports.push(Some(b));
                map.peak_intensity.push(Some(p));
            }
            None => {
                map.rows.push(None);
                map.reports.push(None);
                map.peak_intensity.push(None);
            }
        }
    }
    map
}

fn signal_axis(template: &ProcessConfig, grid: &SpectralGrid) -> Vec<f64> {
    let mut axis: Vec<f64> = grid
        .axis()
        .iter()
        .map(|d| crate::optics::wavelength_nm_from_omega(template.signal_omega() + d))
        .collect();
    axis.reverse();
    axis
}

/// Signal marginal at each temperature of `[t_min, t_max]` (`steps` rows).
pub fn temperature_map(
    template: &ProcessConfig,
    t_range: [f64; 2],
    steps: usize,
    grid: &SpectralGrid,
    fraction: f64,
) -> Result<TuningMap> {
    check_fraction(fraction)?;
    let temps = evenly_spaced(t_range[0], t_range[1], steps)?;
    let rows = temps
        .par_iter()
        .map(|&t| row_for(template.with_temperature(t), grid, fraction))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        TuningParameter::TemperatureC,
        temps,
        rows,
        signal_axis(template, grid),
        fraction,
    ))
}

/// Signal marginal at each pump wavelength, at fixed temperature.
pub fn pump_map(
    template: &ProcessConfig,
    pumps_nm: &[f64],
    grid: &SpectralGrid,
    fraction: f64,
) -> Result<TuningMap> {
    check_fraction(fraction)?;
    let rows = pumps_nm
        .par_iter()
        .map(|&p| row_for(template.with_pump_wavelength(p), grid, fraction))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble(
        TuningParameter::PumpWavelengthNm,
        pumps_nm.to_vec(),
        rows,
        signal_axis(template, grid),
        fraction,
    ))
}

/// FW80 over a pump × temperature grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSurface {
    pub pump_wavelength_nm: Vec<f64>,
    pub temperature_c: Vec<f64>,
    /// `width_thz[i][j]` at pump i and temperature j.
    pub width_thz: Vec<Vec<Option<f64>>>,
    /// Temperature of the largest width for each pump.
    pub best_temperature_c: Vec<Option<f64>>,
    pub best_width_thz: Vec<Option<f64>>,
    pub fraction: f64,
}

impl BandwidthSurface {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "pump_wavelength_nm\\temperature_c")?;
        for t in &self.temperature_c {
            write!(out, ",{t}")?;
        }
        writeln!(out)?;
        for (p, row) in self.pump_wavelength_nm.iter().zip(&self.width_thz) {
            write!(out, "{p}")?;
            for v in row {
                match v {
                    Some(v) => write!(out, ",{v}")?,
                    None => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

pub fn pump_sweep_bandwidth(
    template: &ProcessConfig,
    pumps_nm: &[f64],
    t_range: [f64; 2],
    steps: usize,
    grid: &SpectralGrid,
    fraction: f64,
) -> Result<BandwidthSurface> {
    let temps = evenly_spaced(t_range[0], t_range[1], steps)?;
    let mut width_thz = Vec::with_capacity(pumps_nm.len());
    let mut best_temperature_c = Vec::with_capacity(pumps_nm.len());
    let mut best_width_thz = Vec::with_capacity(pumps_nm.len());
    for &p in pumps_nm {
        let map = match template.with_pump_wavelength(p) {
            Ok(cfg) => temperature_map(&cfg, t_range, steps, grid, fraction)?,
            Err(e) if is_validity_error(&e) => {
                width_thz.push(vec![None; temps.len()]);
                best_temperature_c.push(None);
                best_width_thz.push(None);
                continue;
            }
            Err(e) => return Err(e),
        };
        let best = map.broadest();
        best_temperature_c.push(best.map(|(t, _)| t));
        best_width_thz.push(best.map(|(_, r)| r.width_thz));
        width_thz.push(map.bandwidths_thz());
    }
    Ok(BandwidthSurface {
        pump_wavelength_nm: pumps_nm.to_vec(),
        temperature_c: temps,
        width_thz,
        best_temperature_c,
        best_width_thz,
        fraction,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    AboveDesign,
    AtDesign,
    BelowDesign,
}

/// Thresholds of the regime classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeCriteria {
    /// Main-lobe span (nm) that marks the broadband design row.
    pub broadband_span_nm: f64,
    pub peak_height: f64,
    pub peak_prominence: f64,
    pub peak_merge_bins: usize,
    /// Rows with width above this multiple of the median count as broadband.
    pub broadband_over_median: f64,
    /// Minimum unnormalized row maximum for a row's shape to be judged;
    /// weaker rows are off-resonant sinc tails whose ripples are not peaks.
    pub phase_matched_intensity: f64,
}

impl Default for RegimeCriteria {
    fn default() -> Self {
        Self {
            broadband_span_nm: 50.0,
            peak_height: 0.5,
            peak_prominence: 0.2,
            peak_merge_bins: 2,
            broadband_over_median: 1.5,
            phase_matched_intensity: 0.5,
        }
    }
}

/// Local maxima above `height` with at least `prominence`, merged within `merge` bins.
pub fn find_peaks(values: &[f64], height: f64, prominence: f64, merge: usize) -> Vec<usize> {
    let n = values.len();
    let mut candidates = Vec::new();
    let mut i = 0;
    while i < n {
        // Treat a flat top as one maximum at its first sample.
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] < values[i];
        let right_ok = j + 1 == n || values[j + 1] < values[i];
        if left_ok && right_ok && values[i] >= height && n > 1 {
            candidates.push(i);
        }
        i = j + 1;
    }
    let prominent: Vec<usize> = candidates
        .into_iter()
        .filter(|&p| {
            let v = values[p];
            let mut left_min = v;
            let mut k = p;
            while k > 0 && values[k - 1] <= v {
                k -= 1;
                left_min = left_min.min(values[k]);
            }
            let mut right_min = v;
            let mut k = p;
            while k + 1 < n && values[k + 1] <= v {
                k += 1;
                right_min = right_min.min(values[k]);
            }
            v - left_min.max(right_min) >= prominence
        })
        .collect();
    let mut merged: Vec<usize> = Vec::new();
    for p in prominent {
        match merged.last_mut() {
            Some(last) if p - *last <= merge => {
                if values[p] > values[*last] {
                    *last = p;
                }
            }
            _ => merged.push(p),
        }
    }
    merged
}

/// Maximal runs of consecutive present rows whose width exceeds `threshold`.
fn broadband_runs(widths: &[Option<f64>], threshold: f64) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, w) in widths.iter().enumerate() {
        let hit = w.is_some_and(|w| w > threshold);
        match (hit, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, widths.len() - 1));
    }
    runs
}

/// Evidence behind a regime decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: Regime,
    pub median_width_thz: f64,
    /// Parameter ranges of the broadband runs.
    pub broadband_regions: Vec<(f64, f64)>,
    pub max_peaks_in_row: usize,
    pub widest_main_lobe_nm: f64,
}

pub fn classify_regime(map: &TuningMap) -> Result<Regime> {
    classify_regime_with(map, &RegimeCriteria::default()).map(|r| r.regime)
}

/// Below design: two disjoint broadband parameter regions, or a row with at
/// least three peaks. At design: a row whose main lobe spans more than the
/// broadband span. Otherwise above design. Peaks and main lobes are only
/// taken from phase-matched rows; the median runs over all present rows.
pub fn classify_regime_with(map: &TuningMap, c: &RegimeCriteria) -> Result<RegimeReport> {
    let present: Vec<(usize, &Vec<f64>, &BandwidthReport)> = map.present().collect();
    if present.len() < 3 {
        return Err(Error::InsufficientRange(format!(
            "only {} usable rows",
            present.len()
        )));
    }
    let (first, last) = (present[0].0, present[present.len() - 1].0);
    let broadest = present
        .iter()
        .fold(
            None::<&(usize, &Vec<f64>, &BandwidthReport)>,
            |acc, r| match acc {
                Some(a) if a.2.width_thz >= r.2.width_thz => Some(a),
                _ => Some(r),
            },
        )
        .expect("non-empty");
    if broadest.0 == first || broadest.0 == last {
        return Err(Error::InsufficientRange(format!(
            "widest row lies at the edge of the scanned range ({} = {})",
            map.parameter.label(),
            map.parameter_values[broadest.0]
        )));
    }
    let mut widths: Vec<f64> = present.iter().map(|r| r.2.width_thz).collect();
    widths.sort_by(f64::total_cmp);
    let median = if widths.len() % 2 == 1 {
        widths[widths.len() / 2]
    } else {
        0.5 * (widths[widths.len() / 2 - 1] + widths[widths.len() / 2])
    };
    let runs = broadband_runs(&map.bandwidths_thz(), c.broadband_over_median * median);
    let broadband_regions: Vec<(f64, f64)> = runs
        .iter()
        .map(|&(a, b)| (map.parameter_values[a], map.parameter_values[b]))
        .collect();
    let matched: Vec<&(usize, &Vec<f64>, &BandwidthReport)> = present
        .iter()
        .filter(|r| map.peak_intensity[r.0].is_some_and(|p| p >= c.phase_matched_intensity))
        .collect();
    let max_peaks_in_row = matched
        .iter()
        .map(|r| find_peaks(r.1, c.peak_height, c.peak_prominence, c.peak_merge_bins).len())
        .max()
        .unwrap_or(0);
    let widest_main_lobe_nm = matched
        .iter()
        .map(|r| r.2.main_lobe_span_nm())
        .fold(0.0, f64::max);
    let regime = if runs.len() >= 2 || max_peaks_in_row >= 3 {
        Regime::BelowDesign
    } else if widest_main_lobe_nm > c.broadband_span_nm {
        Regime::AtDesign
    } else {
        Regime::AboveDesign
    };
    Ok(RegimeReport {
        regime,
        median_width_thz: median,
        broadband_regions,
        max_peaks_in_row,
        widest_main_lobe_nm,
    })
}
