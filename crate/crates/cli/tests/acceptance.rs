//! Acceptance checks: one PASS/FAIL line per criterion. Exits non-zero if
//! any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use qpm_core::jsa::sinc;
use qpm_core::metrology::effective_reflectivity;
use qpm_core::optics::thz_to_rad_per_s;
use qpm_core::tuning::{bandwidth_report, classify_regime_with, RegimeCriteria};
use qpm_core::{
    bandwidth_fw_at_fraction, brightness_lower_bound, correlation_time, delta_beta,
    fringe_contrast, jsa, loss_from_contrast, marginal_spectrum, solve_design_point,
    taylor_coefficients, taylor_mismatch, taylor_remainder_constant, temperature_map, Arm,
    BrightnessInput, DesignOptions, Dispersion, DispersionModel, FringeScan, ProcessConfig, Regime,
    SpectralGrid, WaveguideSpec, WorkingPoint,
};

type Check = Result<(bool, String), String>;

fn model() -> Arc<dyn Dispersion> {
    Arc::new(DispersionModel::bundled())
}

fn waveguide(period_um: f64) -> WaveguideSpec {
    WaveguideSpec {
        poling_period_um: period_um,
        ..Default::default()
    }
}

struct Design {
    period_um: f64,
    point: WorkingPoint,
    elapsed: Duration,
}

fn designs() -> Result<Vec<Design>, String> {
    [5.8, 6.0, 6.3]
        .into_iter()
        .map(|period_um| {
            let start = Instant::now();
            let point =
                solve_design_point(model(), &waveguide(period_um), &DesignOptions::default())
                    .map_err(|e| format!("Λ = {period_um} um: {e}"))?;
            Ok(Design {
                period_um,
                point,
                elapsed: start.elapsed(),
            })
        })
        .collect()
}

fn config_at(d: &Design) -> Result<ProcessConfig, String> {
    d.point
        .process_config(model(), &waveguide(d.period_um))
        .map_err(|e| e.to_string())
}

fn criterion_1(designs: &[Design]) -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for d in designs {
        let p = &d.point;
        let r = &p.residuals;
        let pass = (600.0..=700.0).contains(&p.pump_wavelength_nm)
            && r.gv_term_s_per_m.abs() <= 1e-16
            && r.gvd_term_s2_per_m.abs() <= 1e-29
            && r.delta_beta0_rad_per_m.abs() <= 1e-9
            && d.elapsed < Duration::from_secs(10);
        ok &= pass;
        detail.push(format!(
            "Λ {}: pump {:.4} nm, gv {:.1e}, gvd {:.1e}, dβ0 {:.1e}, {:.1} s",
            d.period_um,
            p.pump_wavelength_nm,
            r.gv_term_s_per_m,
            r.gvd_term_s2_per_m,
            r.delta_beta0_rad_per_m,
            d.elapsed.as_secs_f64()
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn criterion_2(designs: &[Design]) -> Check {
    let hit = designs.iter().find(|d| {
        let p = &d.point;
        (p.signal_wavelength_nm - 860.0).abs() <= 40.0
            && (p.pump_wavelength_nm - 652.3).abs() <= 6.0
            && (p.temperature_c - 230.0).abs() <= 60.0
    });
    let all: Vec<String> = designs
        .iter()
        .map(|d| {
            format!(
                "Λ {}: signal {:.1} nm, pump {:.2} nm, T {:.1} C",
                d.period_um,
                d.point.signal_wavelength_nm,
                d.point.pump_wavelength_nm,
                d.point.temperature_c
            )
        })
        .collect();
    Ok((hit.is_some(), all.join("; ")))
}

fn fw80_and_tau(cfg: &ProcessConfig, grid: &SpectralGrid) -> Result<(f64, f64), String> {
    let result = jsa(cfg, grid).map_err(|e| e.to_string())?;
    let m = marginal_spectrum(&result, Arm::Signal, false).map_err(|e| e.to_string())?;
    let w = bandwidth_report(&m, 0.8)
        .map_err(|e| e.to_string())?
        .width_thz;
    let tau = correlation_time(&m).map_err(|e| e.to_string())?;
    Ok((w, tau))
}

fn criterion_3(design: &Design) -> Check {
    let cfg = config_at(design)?;
    if cfg.waveguide().length_mm != 40.0 {
        return Err("waveguide length is not 40 mm".into());
    }
    let grid = SpectralGrid::default();
    let (w, tau) = fw80_and_tau(&cfg, &grid)?;
    let (w2, _) = fw80_and_tau(&cfg, &grid.refined())?;
    let change = (w2 - w).abs() / w;
    Ok((
        w >= 20.0 && tau <= 40.0 && change < 5e-3,
        format!(
            "FW80 {w:.3} THz (need >= 20), correlation time {tau:.2} fs (need <= 40), grid doubling {:.2e} (need < 5e-3)",
            change
        ),
    ))
}

fn criterion_4(design: &Design) -> Check {
    let cfg = config_at(design)?;
    let t0 = design.point.temperature_c;
    let mut ok = true;
    let mut detail = Vec::new();
    let mut below_regions = 0;
    for (offset, expected) in [
        (0.5, Regime::AboveDesign),
        (0.0, Regime::AtDesign),
        (-0.5, Regime::BelowDesign),
    ] {
        let start = Instant::now();
        let template = cfg
            .with_pump_wavelength(design.point.pump_wavelength_nm + offset)
            .map_err(|e| e.to_string())?;
        let map = temperature_map(
            &template,
            [t0 - 10.0, t0 + 10.0],
            4001,
            &SpectralGrid::default(),
            0.8,
        )
        .map_err(|e| e.to_string())?;
        let report =
            classify_regime_with(&map, &RegimeCriteria::default()).map_err(|e| e.to_string())?;
        let elapsed = start.elapsed();
        ok &= report.regime == expected && elapsed < Duration::from_secs(60);
        if expected == Regime::BelowDesign {
            below_regions = report.broadband_regions.len();
        }
        detail.push(format!(
            "{offset:+} nm: {:?} (want {expected:?}), {} broadband region(s), {:.1} s",
            report.regime,
            report.broadband_regions.len(),
            elapsed.as_secs_f64()
        ));
    }
    ok &= below_regions >= 2;
    detail.push(format!(
        "below-design map has {below_regions} disjoint broadband region(s), need 2"
    ));
    Ok((ok, detail.join("; ")))
}

fn criterion_5(design: &Design) -> Check {
    let cfg = config_at(design)?;
    let span = thz_to_rad_per_s(2.0);
    let coarse = taylor_remainder_constant(&cfg, span, 201).map_err(|e| e.to_string())?;
    let fine = taylor_remainder_constant(&cfg, span, 401).map_err(|e| e.to_string())?;
    // Check the bound itself on an independent grid with the fine constant.
    let coeffs = taylor_coefficients(&cfg).map_err(|e| e.to_string())?;
    let mut bound_holds = true;
    for k in 1..=97 {
        let dw = span * (k as f64 / 97.0) * if k % 2 == 0 { 1.0 } else { -1.0 };
        let rem =
            (delta_beta(&cfg, dw).map_err(|e| e.to_string())? - taylor_mismatch(&coeffs, dw)).abs();
        bound_holds &= rem <= 1.2 * fine * dw.abs().powi(3);
    }
    let drift = (fine - coarse).abs() / coarse;
    Ok((
        drift <= 0.2 && bound_holds,
        format!("C {coarse:.4e} (201 pts) vs {fine:.4e} (401 pts) s^3/m, drift {:.1}%, bound holds {bound_holds}", drift * 100.0),
    ))
}

fn criterion_6(design: &Design) -> Check {
    let cfg = config_at(design)?;
    let r = jsa(&cfg, &SpectralGrid::default()).map_err(|e| e.to_string())?;
    let centre = r.delta_omega.len() / 2;
    let max_abs = r.amplitude.iter().map(|f| f.norm()).fold(0.0, f64::max);
    let centre_abs = r.amplitude[centre].norm();
    // arg f = ΔβL/2 + arg sinc(ΔβL/2); on lobes where sinc < 0 the identity carries π.
    let mut phase_err: f64 = 0.0;
    for (f, db) in r.amplitude.iter().zip(&r.delta_beta) {
        let half = db * r.length_m / 2.0;
        if f.norm() < 1e-12 {
            continue;
        }
        let expected = half + if sinc(half) < 0.0 { PI } else { 0.0 };
        let d = (f.arg() - expected).rem_euclid(2.0 * PI);
        phase_err = phase_err.max(d.min(2.0 * PI - d));
    }
    let s = marginal_spectrum(&r, Arm::Signal, false).map_err(|e| e.to_string())?;
    let i = marginal_spectrum(&r, Arm::Idler, false).map_err(|e| e.to_string())?;
    let mirror = s.intensity.iter().rev().eq(i.intensity.iter());
    let ok = max_abs <= 1.0 && (centre_abs - 1.0).abs() <= 1e-9 && phase_err <= 1e-9 && mirror;
    Ok((
        ok,
        format!("max |f| {max_abs}, |f(0)| {centre_abs}, max phase error {phase_err:.1e} rad, mirror exact {mirror}"),
    ))
}

fn airy(r: f64, alpha: f64, length_cm: f64, phase: f64) -> f64 {
    let r_eff = r * 10f64.powf(-alpha * length_cm / 10.0);
    let s = phase.sin();
    1.0 / ((1.0 - r_eff).powi(2) + 4.0 * r_eff * s * s)
}

fn airy_scan(r: f64, alpha: f64, length_cm: f64) -> FringeScan {
    let n = 201;
    let axis: Vec<f64> = (0..n).map(|i| i as f64 / 50.0).collect();
    let power = axis
        .iter()
        .map(|x| airy(r, alpha, length_cm, PI * x + 0.3719))
        .collect();
    FringeScan::new(axis, power, r, length_cm).expect("valid scan")
}

fn criterion_7() -> Check {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for alpha in [0.05, 0.1, 0.2, 0.5] {
        for r in [0.1, 0.14, 0.2] {
            for l in [2.0, 4.0, 8.0] {
                let scan = airy_scan(r, alpha, l);
                let k = fringe_contrast(&scan).map_err(|e| e.to_string())?;
                let a = loss_from_contrast(k, r, l).map_err(|e| e.to_string())?;
                worst = worst.max((a - alpha).abs() / alpha);
                cases += 1;
            }
        }
    }
    let scan = airy_scan(0.1406, 0.2, 4.0);
    let k = fringe_contrast(&scan).map_err(|e| e.to_string())?;
    let a = loss_from_contrast(k, 0.1406, 4.0).map_err(|e| e.to_string())?;
    let paper_err = (a - 0.2).abs() / 0.2;
    let k_err = (k - 0.2298).abs() / 0.2298;
    effective_reflectivity(k).map_err(|e| e.to_string())?;
    Ok((
        cases == 36 && worst < 0.01 && paper_err < 0.01 && k_err < 0.01,
        format!(
            "{cases} cases, worst α error {:.3}%; paper case K {k:.5} (quoted 0.2298, {:.2}% off), α {a:.5} dB/cm",
            worst * 100.0,
            k_err * 100.0
        ),
    ))
}

fn criterion_8() -> Check {
    let mut input = BrightnessInput::new(1.25e8, 0.0, 1.0, 25_000.0);
    let plain = brightness_lower_bound(&input).map_err(|e| e.to_string())?;
    input.coupling_efficiency = Some(0.2);
    let corrected = brightness_lower_bound(&input).map_err(|e| e.to_string())?;
    let est = corrected.efficiency_corrected_estimate.unwrap_or(f64::NAN);
    Ok((
        plain.lower_bound == 5e3 && est == 2.5e4,
        format!(
            "lower bound {:e}, η = 0.2 estimate {est:e}",
            plain.lower_bound
        ),
    ))
}

fn criterion_9() -> Check {
    let sigma = 3.0;
    let axis: Vec<f64> = (0..20001).map(|i| -50.0 + i as f64 * 0.005).collect();
    let gauss: Vec<f64> = axis
        .iter()
        .map(|x| (-x * x / (2.0 * sigma * sigma)).exp())
        .collect();
    let w = bandwidth_fw_at_fraction(&axis, &gauss, 0.8)
        .map_err(|e| e.to_string())?
        .width;
    let exact = 2.0 * sigma * (2.0 * 1.25f64.ln()).sqrt();
    let gauss_err = (w - exact).abs() / exact;

    // Root of sinc²(x) = 0.8 by bisection.
    let (mut lo, mut hi) = (0.5, 1.2);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sinc(mid).powi(2) > 0.8 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x80 = 0.5 * (lo + hi);
    let sinc2: Vec<f64> = axis.iter().map(|x| sinc(*x).powi(2)).collect();
    let ws = bandwidth_fw_at_fraction(&axis, &sinc2, 0.8)
        .map_err(|e| e.to_string())?
        .width;
    let sinc_err = (ws - 2.0 * x80).abs() / (2.0 * x80);
    Ok((
        gauss_err < 1e-3 && sinc_err < 1e-3 && (x80 - 0.810).abs() < 1e-3,
        format!(
            "Gaussian {w:.6} vs {exact:.6} ({:.1e}), sinc² {ws:.6} vs 2·x80 = {:.6} ({:.1e})",
            gauss_err,
            2.0 * x80,
            sinc_err
        ),
    ))
}

fn run_qpm(args: &[&str], cwd: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_qpm"))
        .args(args)
        .current_dir(cwd)
        .env_remove("QPM_MODEL_DIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "qpm {}: {}",
            args.join(" "),
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .map(|d| {
            d.filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.file_name().is_some_and(|n| n != "timing.json"))
                .map(|p| {
                    (
                        p.file_name().unwrap().to_string_lossy().into_owned(),
                        std::fs::read(&p).unwrap_or_default(),
                    )
                })
                .collect()
        })
        .unwrap_or_default()
}

fn criterion_10() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fringes");
    let corpus = corpus.to_str().ok_or("non-UTF-8 path")?;
    let brightness = [
        "--detected-rate-cps",
        "1.25e8",
        "--pump-power-mw",
        "1",
        "--bandwidth-ghz",
        "25000",
        "--coupling-efficiency",
        "0.2",
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for cmd in ["design", "jsa", "tune", "sweep", "loss", "brightness"] {
        let mut runs = Vec::new();
        for n in 0..2 {
            let out = format!("{cmd}-{n}");
            let mut args = vec![cmd, "--out", out.as_str()];
            match cmd {
                "loss" => args.push(corpus),
                "brightness" => args.extend(brightness),
                _ => {}
            }
            run_qpm(&args, dir.path())?;
            runs.push(files(&dir.path().join(&out)));
        }
        let same = runs[0] == runs[1] && !runs[0].is_empty();
        ok &= same;
        detail.push(format!(
            "{cmd} {} files {}",
            runs[0].len(),
            if same { "identical" } else { "DIFFER" }
        ));
    }
    Ok((ok, detail.join(", ")))
}

fn main() {
    let designs = designs();
    let design_63 = |f: fn(&Design) -> Check| -> Check {
        let ds = designs.as_ref().map_err(|e| e.clone())?;
        f(ds.iter()
            .find(|d| d.period_um == 6.3)
            .ok_or("no Λ = 6.3 um design")?)
    };
    let checks: Vec<(u32, &str, Check)> = vec![
        (
            1,
            "design-point existence",
            designs
                .as_ref()
                .map_err(|e| e.clone())
                .and_then(|d| criterion_1(d)),
        ),
        (
            2,
            "paper proximity",
            designs
                .as_ref()
                .map_err(|e| e.clone())
                .and_then(|d| criterion_2(d)),
        ),
        (3, "bandwidth", design_63(criterion_3)),
        (4, "tuning regimes", design_63(criterion_4)),
        (5, "Taylor fidelity", design_63(criterion_5)),
        (6, "sinc/JSA properties", design_63(criterion_6)),
        (7, "loss round trip", criterion_7()),
        (8, "brightness arithmetic", criterion_8()),
        (9, "analytic bandwidth oracles", criterion_9()),
        (10, "determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (n, name, check) in &checks {
        let (pass, detail) = match check {
            Ok((pass, detail)) => (*pass, detail.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {}: {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
