mod common;

use common::{data_dir, deterministic_files, qpm, qpm_env, FAST_CONFIG};
use serde_json::Value;

fn json(path: &std::path::Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn design_writes_point_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let r = qpm(&["design", "--out", "out"], dir.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("pump"));
    let wp = json(&dir.path().join("out/working_point.json"));
    assert_eq!(wp["within_tolerances"], true);
    let t = wp["lab"]["temperature_c"].as_f64().unwrap();
    assert!((t - 205.575).abs() < 0.01, "{t}");
    let res = &wp["model_frame"]["residuals"];
    assert!(res["gv_term_s_per_m"].as_f64().unwrap().abs() <= 1e-16);
    assert!(res["gvd_term_s2_per_m"].as_f64().unwrap().abs() <= 1e-29);
    assert!(res["delta_beta0_rad_per_m"].as_f64().unwrap().abs() <= 1e-9);
    let manifest = json(&dir.path().join("out/manifest.json"));
    assert_eq!(manifest["subcommand"], "design");
    assert_eq!(
        manifest["model"]["origin"],
        "builtin:lithium_niobate_ti_waveguide.toml"
    );
    assert_eq!(manifest["tool_version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn offsets_shift_lab_values_only() {
    let dir = tempfile::tempdir().unwrap();
    let r = qpm(
        &[
            "design",
            "--out",
            "a",
            "--temp-offset",
            "40",
            "--pump-offset",
            "-2.4",
        ],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let wp = json(&dir.path().join("a/working_point.json"));
    let lab_t = wp["lab"]["temperature_c"].as_f64().unwrap();
    let model_t = wp["model_frame"]["temperature_c"].as_f64().unwrap();
    assert_eq!(lab_t, model_t + 40.0);
    let lab_p = wp["lab"]["pump_wavelength_nm"].as_f64().unwrap();
    let model_p = wp["model_frame"]["pump_wavelength_nm"].as_f64().unwrap();
    assert_eq!(lab_p, model_p - 2.4);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "temp_offset_k = 10.0\n").unwrap();
    let r = qpm(
        &[
            "--config",
            "run.toml",
            "design",
            "--out",
            "o",
            "--temp-offset",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let cfg = std::fs::read_to_string(dir.path().join("o/config.toml")).unwrap();
    assert!(cfg.contains("temp_offset_k = 5.0"), "{cfg}");
}

#[test]
fn missing_model_exits_3_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let r = qpm(&["design", "--model", "no/such/model.toml"], dir.path());
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("no/such/model.toml"), "{}", r.stderr);
}

#[test]
fn empty_pump_range_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[design]\npump_range_nm = [700.0, 600.0]\n",
    )
    .unwrap();
    let r = qpm(&["--config", "c.toml", "design"], dir.path());
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("pump_range_nm"));
}

#[test]
fn unknown_config_key_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "[grid]\nspan_thz = 4.0\n").unwrap();
    assert_eq!(qpm(&["--config", "c.toml", "design"], dir.path()).code, 3);
}

#[test]
fn no_root_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[design]\ntemperature_range_c = [20.0, 60.0]\n",
    )
    .unwrap();
    let r = qpm(&["--config", "c.toml", "design"], dir.path());
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn usage_errors_exit_3_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(qpm(&["design", "--bogus"], dir.path()).code, 3);
    let help = qpm(&["--help"], dir.path());
    assert_eq!(help.code, 0);
    assert!(help.stdout.contains("Exit codes"));
}

#[test]
fn model_found_through_search_dir() {
    let models = tempfile::tempdir().unwrap();
    std::fs::write(
        models.path().join("ln.toml"),
        qpm_core::dispersion::BUNDLED_MODEL_TOML,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let r = qpm_env(
        &["design", "--model", "ln.toml", "--out", "o"],
        dir.path(),
        &[("QPM_MODEL_DIR", models.path().to_str().unwrap())],
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let manifest = json(&dir.path().join("o/manifest.json"));
    assert_eq!(
        manifest["model"]["sha256"],
        qpm_cli::config::sha256_hex(qpm_core::dispersion::BUNDLED_MODEL_TOML.as_bytes())
    );
}

#[test]
fn tune_map_is_broadest_near_working_temperature() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), FAST_CONFIG).unwrap();
    let r = qpm(&["--config", "c.toml", "tune", "--out", "t"], dir.path());
    assert_eq!(r.code, 0, "{}", r.stderr);
    let map = json(&dir.path().join("t/tuning_map.json"));
    let t0 = map["operating_point"]["temperature_c"].as_f64().unwrap();
    let temps: Vec<f64> = map["parameter_values"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    let widths: Vec<f64> = map["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["width_thz"].as_f64().unwrap())
        .collect();
    let best = widths
        .iter()
        .enumerate()
        .fold(0, |b, (i, &w)| if w > widths[b] { i } else { b });
    assert!((temps[best] - t0).abs() <= 0.05, "{} vs {t0}", temps[best]);
    assert_eq!(map["regime"]["regime"], "at_design");
    let csv = std::fs::read_to_string(dir.path().join("t/tuning_map.csv")).unwrap();
    assert_eq!(csv.lines().count(), 82);
}

#[test]
fn loss_corpus_recovers_injected_losses() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data_dir().join("fringes");
    let r = qpm(
        &["loss", corpus.to_str().unwrap(), "--out", "l"],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let truth = std::fs::read_to_string(corpus.join("truth.csv")).unwrap();
    let report = std::fs::read_to_string(dir.path().join("l/loss_report.csv")).unwrap();
    let measured: std::collections::HashMap<&str, f64> = report
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0], f[3].parse().unwrap())
        })
        .collect();
    let mut cases = 0;
    for line in truth.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let alpha: f64 = f[3].parse().unwrap();
        let got = measured[f[0]];
        assert!(
            (got - alpha).abs() <= 0.01 * alpha,
            "{}: {got} vs {alpha}",
            f[0]
        );
        cases += 1;
    }
    assert_eq!(cases, 36);
}

#[test]
fn failed_scans_exit_8_with_flagged_report() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = data_dir().join("fringes_bad");
    let r = qpm(
        &["loss", corpus.to_str().unwrap(), "--out", "l"],
        dir.path(),
    );
    assert_eq!(r.code, 8, "{}", r.stderr);
    let report = std::fs::read_to_string(dir.path().join("l/loss_report.csv")).unwrap();
    assert!(report.contains("gain,") && report.contains("gain_implied"));
    assert!(report
        .lines()
        .any(|l| l.starts_with("ok,") && l.ends_with(',')));
    assert!(dir.path().join("l/manifest.json").exists());
}

#[test]
fn loss_without_sidecar_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.csv"), "0,1\n1,2\n2,1\n").unwrap();
    let r = qpm(&["loss", "s.csv"], dir.path());
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.contains("sidecar"));
}

#[test]
fn brightness_flags_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let r = qpm(
        &[
            "brightness",
            "--detected-rate-cps",
            "1.25e8",
            "--pump-power-mw",
            "1",
            "--bandwidth-ghz",
            "25000",
            "--coupling-efficiency",
            "0.2",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let b = json(&dir.path().join("b/brightness.json"));
    assert_eq!(b["lower_bound"].as_f64().unwrap(), 5e3);
    assert_eq!(b["efficiency_corrected_estimate"].as_f64().unwrap(), 2.5e4);
    assert_eq!(
        qpm(&["brightness", "--pump-power-mw", "1"], dir.path()).code,
        3
    );
    let negative = qpm(
        &[
            "brightness",
            "--detected-rate-cps",
            "10",
            "--background-rate-cps",
            "20",
            "--pump-power-mw",
            "1",
            "--bandwidth-ghz",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(negative.code, 8, "{}", negative.stderr);
}

#[test]
fn emitted_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), FAST_CONFIG).unwrap();
    assert_eq!(
        qpm(
            &[
                "--config",
                "c.toml",
                "jsa",
                "--out",
                "a",
                "--temp-offset",
                "1.5"
            ],
            dir.path()
        )
        .code,
        0
    );
    let r = qpm(
        &["--config", "a/config.toml", "jsa", "--out", "b"],
        dir.path(),
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(
        deterministic_files(&dir.path().join("a")),
        deterministic_files(&dir.path().join("b"))
    );
}

#[test]
fn every_subcommand_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), FAST_CONFIG).unwrap();
    let corpus = data_dir().join("fringes");
    for cmd in ["design", "jsa", "tune", "sweep", "loss", "brightness"] {
        let mut outs = Vec::new();
        for run in ["1", "2"] {
            let out = format!("{cmd}{run}");
            let mut args = vec!["--config", "c.toml", cmd, "--out", &out];
            if cmd == "loss" {
                args.push(corpus.to_str().unwrap());
            }
            let r = qpm(&args, dir.path());
            assert_eq!(r.code, 0, "{cmd}: {}", r.stderr);
            outs.push(deterministic_files(&dir.path().join(&out)));
        }
        assert!(outs[0].len() >= 3, "{cmd}");
        assert_eq!(outs[0], outs[1], "{cmd}");
    }
}
