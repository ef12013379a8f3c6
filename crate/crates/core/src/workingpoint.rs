//! Working-point search: the (pump, temperature, signal) triple at which the
//! first- and second-order mismatch terms vanish together for a given poling
//! period, and the inverse problem of choosing Λ for a given pump and
//! temperature.
//!
//! Because ∂gv_term/∂ω_s = 2·gvd_term, the GVD-cancelling signal is the
//! stationary point of gv_term, and the simultaneous solution is a double
//! root of the GV condition. The nested solve therefore runs
//!
//! 1. signal: gvd_term(ω_s) = 0 (stationary point of gv_term),
//! 2. pump: gv_term = 0 at that signal,
//! 3. temperature: Δβ⁰(Λ) = 0 at the resulting frequencies,
//!
//! each level a coarse scan followed by bracketed refinement. Above the
//! design pump gv_term has no zero at all; below it there are two.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dispersion::Dispersion;
use crate::error::{Error, Result, SolveLevel};
use crate::jsa::idler_wavelength_of;
use crate::optics::{omega_from_wavelength_nm, wavelength_nm_from_omega};
use crate::phasematch::{
    delta_beta, dispersion_term, group_velocity_term, poling_period_for_config,
    PolarizationAssignment, ProcessConfig, WaveguideSpec,
};
use crate::roots::{refine, scan, solve_unique, Bracket, RootOptions};

/// Residual bounds and interval floors for the nested solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub gv_term_s_per_m: f64,
    pub gvd_term_s2_per_m: f64,
    pub delta_beta0_rad_per_m: f64,
    pub signal_interval_nm: f64,
    pub pump_interval_nm: f64,
    pub temperature_interval_c: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gv_term_s_per_m: 1e-16,
            gvd_term_s2_per_m: 1e-29,
            delta_beta0_rad_per_m: 1e-9,
            signal_interval_nm: 1e-6,
            pump_interval_nm: 1e-6,
            temperature_interval_c: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignOptions {
    pub signal_range_nm: [f64; 2],
    pub pump_range_nm: [f64; 2],
    pub temperature_range_c: [f64; 2],
    /// Samples in every coarse bracket scan.
    pub scan_points: usize,
    pub max_iterations: usize,
    pub tolerances: Tolerances,
    /// Signal used when GV matching holds on the whole bracket (dispersionless models).
    pub signal_hint_nm: Option<f64>,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            signal_range_nm: [700.0, 1100.0],
            pump_range_nm: [600.0, 700.0],
            temperature_range_c: [20.0, 400.0],
            scan_points: 201,
            max_iterations: 200,
            tolerances: Tolerances::default(),
            signal_hint_nm: None,
        }
    }
}

impl DesignOptions {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [
            ("signal_range_nm", self.signal_range_nm),
            ("pump_range_nm", self.pump_range_nm),
            ("temperature_range_c", self.temperature_range_c),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(format!(
                    "{name} must be a non-empty interval, got [{lo}, {hi}]"
                )));
            }
        }
        if self.scan_points < 3 {
            return Err(Error::config("scan_points must be at least 3"));
        }
        Ok(())
    }
}

/// How the GV-matched signal was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GvRootKind {
    /// gv_term changes sign.
    Crossing,
    /// gv_term touches zero at its stationary point (the GVD-cancelling signal).
    Tangent,
    /// gv_term vanishes on the whole bracket; the signal is the configured hint.
    Degenerate,
}

/// Which zero of gv_term to take when two exist (pump below design).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GvBranch {
    /// Demand a single zero; two zeros are a `MultipleRoots` error.
    Unique,
    ShortWave,
    LongWave,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GvMatch {
    pub signal_omega: f64,
    pub idler_omega: f64,
    pub gv_term: f64,
    pub kind: GvRootKind,
}

impl GvMatch {
    pub fn signal_wavelength_nm(&self) -> f64 {
        wavelength_nm_from_omega(self.signal_omega)
    }

    pub fn idler_wavelength_nm(&self) -> f64 {
        wavelength_nm_from_omega(self.idler_omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub gv_term_s_per_m: f64,
    pub gvd_term_s2_per_m: f64,
    pub delta_beta0_rad_per_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingPoint {
    pub pump_wavelength_nm: f64,
    pub temperature_c: f64,
    pub signal_wavelength_nm: f64,
    pub idler_wavelength_nm: f64,
    pub poling_period_um: f64,
    /// Exact frequencies, so the point can be rebuilt bit for bit.
    pub pump_omega_rad_s: f64,
    pub signal_omega_rad_s: f64,
    pub signal_root: GvRootKind,
    /// Signed residuals re-evaluated at the returned point.
    pub residuals: Residuals,
    pub tolerances: Tolerances,
    pub model: String,
    pub model_version: String,
}

impl WorkingPoint {
    /// Process configuration at this point, for a waveguide template whose Λ is replaced.
    pub fn process_config(
        &self,
        model: Arc<dyn Dispersion>,
        waveguide: &WaveguideSpec,
    ) -> Result<ProcessConfig> {
        ProcessConfig::new(
            model,
            waveguide.with_poling_period(self.poling_period_um),
            self.pump_omega_rad_s,
            self.signal_omega_rad_s,
            self.temperature_c,
        )
    }

    pub fn within_tolerances(&self) -> bool {
        let r = &self.residuals;
        let t = &self.tolerances;
        r.gv_term_s_per_m.abs() <= t.gv_term_s_per_m
            && r.gvd_term_s2_per_m.abs() <= t.gvd_term_s2_per_m
            && r.delta_beta0_rad_per_m.abs() <= t.delta_beta0_rad_per_m
    }
}

fn root_options(f_tol: f64, x_tol: f64, max_iter: usize) -> RootOptions {
    RootOptions {
        f_tol,
        x_tol,
        max_iter,
    }
}

fn gv_at(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_nm: f64,
    signal_nm: f64,
    t: f64,
) -> Result<f64> {
    group_velocity_term(
        model,
        pols,
        omega_from_wavelength_nm(pump_nm),
        omega_from_wavelength_nm(signal_nm),
        t,
    )
}

fn gvd_at(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_nm: f64,
    signal_nm: f64,
    t: f64,
) -> Result<f64> {
    dispersion_term(
        model,
        pols,
        omega_from_wavelength_nm(pump_nm),
        omega_from_wavelength_nm(signal_nm),
        t,
    )
}

/// Signal wavelength (nm) where gvd_term vanishes, i.e. where gv_term is stationary.
pub fn solve_stationary_signal(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_nm: f64,
    temperature_c: f64,
    opts: &DesignOptions,
) -> Result<f64> {
    let tol = &opts.tolerances;
    let [lo, hi] = opts.signal_range_nm;
    let f = |s: f64| gvd_at(model, pols, pump_nm, s, temperature_c);
    let o = root_options(
        0.01 * tol.gvd_term_s2_per_m,
        tol.signal_interval_nm,
        opts.max_iterations,
    );
    Ok(solve_unique(f, lo, hi, opts.scan_points, SolveLevel::Dispersion, &o)?.x)
}

/// Signal/idler pair at which the group velocities match for a given pump and temperature.
///
/// Requires exactly one zero of gv_term in the signal bracket. When the
/// scan shows no sign change the stationary point is checked for a
/// tangential zero, which is the situation at a design pump.
pub fn solve_gv_matched_signal(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_nm: f64,
    temperature_c: f64,
    opts: &DesignOptions,
) -> Result<GvMatch> {
    solve_gv_matched_signal_on(model, pols, pump_nm, temperature_c, opts, GvBranch::Unique)
}

pub fn solve_gv_matched_signal_on(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    pump_nm: f64,
    temperature_c: f64,
    opts: &DesignOptions,
    branch: GvBranch,
) -> Result<GvMatch> {
    opts.validate()?;
    let tol = &opts.tolerances;
    let [lo, hi] = opts.signal_range_nm;
    let f = |s: f64| gv_at(model, pols, pump_nm, s, temperature_c);
    let s = scan(f, lo, hi, opts.scan_points);
    let finish = |signal_nm: f64, kind: GvRootKind| -> Result<GvMatch> {
        let pump_omega = omega_from_wavelength_nm(pump_nm);
        let signal_omega = omega_from_wavelength_nm(signal_nm);
        Ok(GvMatch {
            signal_omega,
            idler_omega: pump_omega - signal_omega,
            gv_term: group_velocity_term(model, pols, pump_omega, signal_omega, temperature_c)?,
            kind,
        })
    };
    if s.vanishes(tol.gv_term_s_per_m) {
        return match opts.signal_hint_nm {
            Some(hint) => finish(hint, GvRootKind::Degenerate),
            None => Err(Error::DegenerateRoot {
                level: SolveLevel::GroupVelocity,
            }),
        };
    }
    // Two sign changes around a stationary point that is itself within
    // tolerance of zero are one double root split by rounding.
    if s.brackets.len() == 2 {
        if let Ok(stationary) = solve_stationary_signal(model, pols, pump_nm, temperature_c, opts) {
            let (a, b) = (s.brackets[0], s.brackets[1]);
            if a.lo <= stationary && stationary <= b.hi {
                let m = finish(stationary, GvRootKind::Tangent)?;
                if m.gv_term.abs() <= tol.gv_term_s_per_m {
                    return Ok(m);
                }
            }
        }
    }
    let o = root_options(
        0.01 * tol.gv_term_s_per_m,
        tol.signal_interval_nm,
        opts.max_iterations,
    );
    let chosen: Bracket = match (s.brackets.len(), branch) {
        (0, _) => {
            let stationary = solve_stationary_signal(model, pols, pump_nm, temperature_c, opts)
                .map_err(|_| Error::NoRootInBracket {
                    level: SolveLevel::GroupVelocity,
                    lo,
                    hi,
                    scan: s.trace.clone(),
                    cause: s.first_error.clone(),
                })?;
            let m = finish(stationary, GvRootKind::Tangent)?;
            if m.gv_term.abs() <= tol.gv_term_s_per_m {
                return Ok(m);
            }
            return Err(Error::NoRootInBracket {
                level: SolveLevel::GroupVelocity,
                lo,
                hi,
                scan: s.trace,
                cause: s.first_error,
            });
        }
        (1, _) => s.brackets[0],
        (_, GvBranch::Unique) => {
            return Err(Error::MultipleRoots {
                level: SolveLevel::GroupVelocity,
                brackets: s.bracket_bounds(),
            })
        }
        (_, GvBranch::ShortWave) => s.brackets[0],
        (_, GvBranch::LongWave) => *s.brackets.last().expect("non-empty"),
    };
    let root = refine(f, chosen, &o)?;
    finish(root.x, GvRootKind::Crossing)
}

/// Pump wavelength (nm) at which gv_term has a double zero, with its signal (nm).
pub fn solve_design_pump(
    model: &dyn Dispersion,
    pols: PolarizationAssignment,
    temperature_c: f64,
    opts: &DesignOptions,
) -> Result<(f64, f64)> {
    let tol = &opts.tolerances;
    let [lo, hi] = opts.pump_range_nm;
    let f = |p: f64| {
        let s = solve_stationary_signal(model, pols, p, temperature_c, opts)?;
        gv_at(model, pols, p, s, temperature_c)
    };
    let o = root_options(
        0.01 * tol.gv_term_s_per_m,
        tol.pump_interval_nm,
        opts.max_iterations,
    );
    let pump = solve_unique(f, lo, hi, opts.scan_points, SolveLevel::Pump, &o)?.x;
    let signal = solve_stationary_signal(model, pols, pump, temperature_c, opts)?;
    Ok((pump, signal))
}

fn config_at(
    model: &Arc<dyn Dispersion>,
    waveguide: &WaveguideSpec,
    pump_omega: f64,
    signal_omega: f64,
    temperature_c: f64,
) -> Result<ProcessConfig> {
    ProcessConfig::new(
        model.clone(),
        waveguide.clone(),
        pump_omega,
        signal_omega,
        temperature_c,
    )
}

/// Final Δβ⁰ cleanup at fixed frequencies.
///
/// The nested solve leaves Δβ⁰ at the noise level of the pump root. With
/// the frequencies frozen, temperature alone is bisected to adjacent floats;
/// Δβ⁰ is then the difference of three ~10⁷ rad/m terms and its remaining
/// error is roundoff. A fixed neighbourhood of ulp steps in T and ω_s is
/// searched and the smallest |Δβ⁰| kept (first one wins ties).
fn polish_delta_beta(
    model: &Arc<dyn Dispersion>,
    waveguide: &WaveguideSpec,
    pump_omega: f64,
    signal_omega: f64,
    temperature_c: f64,
    opts: &DesignOptions,
) -> Result<(f64, f64, f64)> {
    let db = |t: f64, ws: f64| -> Result<f64> {
        delta_beta(&config_at(model, waveguide, pump_omega, ws, t)?, 0.0)
    };
    let f = |t: f64| db(t, signal_omega);
    let f0 = f(temperature_c)?;
    let mut t_best = temperature_c;
    if f0 != 0.0 {
        let [tmin, tmax] = opts.temperature_range_c;
        let mut step = 1e-6;
        let mut bracket = None;
        while bracket.is_none() && step < tmax - tmin {
            for other in [temperature_c - step, temperature_c + step] {
                if other < tmin || other > tmax {
                    continue;
                }
                let fo = f(other)?;
                if fo.signum() != f0.signum() {
                    let (lo, hi, flo, fhi) = if other < temperature_c {
                        (other, temperature_c, fo, f0)
                    } else {
                        (temperature_c, other, f0, fo)
                    };
                    bracket = Some(Bracket {
                        lo,
                        hi,
                        f_lo: flo,
                        f_hi: fhi,
                    });
                    break;
                }
            }
            step *= 4.0;
        }
        let bracket = bracket.ok_or(Error::NonConverged {
            what: "temperature bracket for the final mismatch polish".into(),
            residual: f0.abs(),
        })?;
        t_best = refine(f, bracket, &root_options(0.0, 0.0, opts.max_iterations))?.x;
    }
    const REACH: i32 = 8;
    let mut best = (t_best, signal_omega, db(t_best, signal_omega)?);
    let mut t = t_best;
    for _ in 0..REACH {
        t = t.next_down();
    }
    for _ in -REACH..=REACH {
        let mut ws = signal_omega;
        for _ in 0..REACH {
            ws = ws.next_down();
        }
        for _ in -REACH..=REACH {
            let v = db(t, ws)?;
            if v.abs() < best.2.abs() {
                best = (t, ws, v);
            }
            ws = ws.next_up();
        }
        t = t.next_up();
    }
    Ok(best)
}

fn residuals_at(config: &ProcessConfig) -> Result<Residuals> {
    let model = config.model().as_ref();
    let pols = config.polarizations();
    let (wp, ws, t) = (
        config.pump_omega(),
        config.signal_omega(),
        config.temperature_c(),
    );
    Ok(Residuals {
        gv_term_s_per_m: group_velocity_term(model, pols, wp, ws, t)?,
        gvd_term_s2_per_m: dispersion_term(model, pols, wp, ws, t)?,
        delta_beta0_rad_per_m: delta_beta(config, 0.0)?,
    })
}

fn working_point(
    config: &ProcessConfig,
    signal_root: GvRootKind,
    tolerances: Tolerances,
) -> Result<WorkingPoint> {
    Ok(WorkingPoint {
        pump_wavelength_nm: config.pump_wavelength_nm(),
        temperature_c: config.temperature_c(),
        signal_wavelength_nm: config.signal_wavelength_nm(),
        idler_wavelength_nm: config.idler_wavelength_nm(),
        poling_period_um: config.waveguide().poling_period_um,
        pump_omega_rad_s: config.pump_omega(),
        signal_omega_rad_s: config.signal_omega(),
        signal_root,
        residuals: residuals_at(config)?,
        tolerances,
        model: config.model().name().to_string(),
        model_version: config.model().version().to_string(),
    })
}

fn check_bounds(wp: &WorkingPoint) -> Result<()> {
    let r = &wp.residuals;
    let t = &wp.tolerances;
    for (what, value, bound) in [
        ("gv_term", r.gv_term_s_per_m, t.gv_term_s_per_m),
        ("gvd_term", r.gvd_term_s2_per_m, t.gvd_term_s2_per_m),
        (
            "delta_beta0",
            r.delta_beta0_rad_per_m,
            t.delta_beta0_rad_per_m,
        ),
    ] {
        if value.is_nan() || value.abs() > bound {
            return Err(Error::NonConverged {
                what: format!("{what} at the working point (bound {bound:e})"),
                residual: value.abs(),
            });
        }
    }
    Ok(())
}

/// Working point for the waveguide's fixed poling period.
///
/// Errors with `NoRootInBracket` (carrying the scanned residual curve) if a
/// level has no zero, and `NonUnique` if the temperature scan finds more
/// than one design solution.
pub fn solve_design_point(
    model: Arc<dyn Dispersion>,
    waveguide: &WaveguideSpec,
    opts: &DesignOptions,
) -> Result<WorkingPoint> {
    opts.validate()?;
    waveguide.validate()?;
    let tol = opts.tolerances;
    let pols = waveguide.polarizations;
    let m = model.as_ref();
    let mismatch_at = |t: f64| -> Result<f64> {
        let (pump, signal) = solve_design_pump(m, pols, t, opts)?;
        let cfg =
            ProcessConfig::from_wavelengths(model.clone(), waveguide.clone(), pump, signal, t)?;
        delta_beta(&cfg, 0.0)
    };
    let [tlo, thi] = opts.temperature_range_c;
    let s = scan(mismatch_at, tlo, thi, opts.scan_points);
    let bracket = match s.brackets.len() {
        0 => {
            return Err(Error::NoRootInBracket {
                level: SolveLevel::Temperature,
                lo: tlo,
                hi: thi,
                scan: s.trace,
                cause: s.first_error,
            })
        }
        1 => s.brackets[0],
        _ => {
            return Err(Error::NonUnique {
                level: SolveLevel::Temperature,
                brackets: s.bracket_bounds(),
            })
        }
    };
    let o = root_options(
        tol.delta_beta0_rad_per_m,
        tol.temperature_interval_c,
        opts.max_iterations,
    );
    let t = refine(mismatch_at, bracket, &o)?.x;
    let (pump, signal) = solve_design_pump(m, pols, t, opts)?;
    let pump_omega = omega_from_wavelength_nm(pump);
    let (t, signal_omega, _) = polish_delta_beta(
        &model,
        waveguide,
        pump_omega,
        omega_from_wavelength_nm(signal),
        t,
        opts,
    )?;
    let cfg = config_at(&model, waveguide, pump_omega, signal_omega, t)?;
    let wp = working_point(&cfg, GvRootKind::Tangent, tol)?;
    check_bounds(&wp)?;
    Ok(wp)
}

/// GV-matched centres for a given pump and temperature, and the Λ that zeroes Δβ⁰ there.
///
/// gvd_term is reported, not constrained. Λ is chosen among a few ulps of
/// the closed-form value to minimize the rounded |Δβ⁰|.
pub fn solve_poling_for_design(
    model: Arc<dyn Dispersion>,
    waveguide: &WaveguideSpec,
    pump_nm: f64,
    temperature_c: f64,
    opts: &DesignOptions,
    branch: GvBranch,
) -> Result<WorkingPoint> {
    waveguide.validate()?;
    let gv = solve_gv_matched_signal_on(
        model.as_ref(),
        waveguide.polarizations,
        pump_nm,
        temperature_c,
        opts,
        branch,
    )?;
    idler_wavelength_of(pump_nm, gv.signal_wavelength_nm())?;
    let cfg = config_at(
        &model,
        waveguide,
        omega_from_wavelength_nm(pump_nm),
        gv.signal_omega,
        temperature_c,
    )?;
    let period = poling_period_for_config(&cfg)?;
    const REACH: i32 = 16;
    let mut p = period;
    for _ in 0..REACH {
        p = p.next_down();
    }
    let mut best = (period, delta_beta(&cfg.with_poling_period(period)?, 0.0)?);
    for _ in -REACH..=REACH {
        let v = delta_beta(&cfg.with_poling_period(p)?, 0.0)?;
        if v.abs() < best.1.abs() {
            best = (p, v);
        }
        p = p.next_up();
    }
    working_point(&cfg.with_poling_period(best.0)?, gv.kind, opts.tolerances)
}
