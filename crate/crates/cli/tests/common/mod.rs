#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Outcome {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

pub fn qpm(args: &[&str], cwd: &Path) -> Outcome {
    qpm_env(args, cwd, &[])
}

pub fn qpm_env(args: &[&str], cwd: &Path, env: &[(&str, &str)]) -> Outcome {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qpm"));
    cmd.args(args).current_dir(cwd).env_remove("QPM_MODEL_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("qpm runs");
    Outcome {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// Contents of every file in `dir` except the wall-clock record.
pub fn deterministic_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "timing.json")
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

/// Small maps and grids so that every subcommand finishes quickly.
pub const FAST_CONFIG: &str = r#"
[grid]
points = 1025

[tune]
temperature_span_k = 2.0
steps = 81

[sweep]
pump_detunings_nm = [0.0, 0.5]
temperature_span_k = 4.0
steps = 41

[brightness]
detected_rate_cps = 1.25e8
pump_power_mw = 1.0
bandwidth_ghz = 25000.0
coupling_efficiency = 0.2
"#;
