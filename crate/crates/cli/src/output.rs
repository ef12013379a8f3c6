//! Output directory handling: atomic file writes and the run manifest.
//!
//! Every file except `timing.json` is a pure function of the resolved
//! configuration, so reruns reproduce them byte for byte.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::config::{sha256_hex, ModelInfo, RunConfig};
use crate::exit::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const TIMING_FILE: &str = "timing.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    subcommand: &'a str,
    model: Option<&'a ModelInfo>,
    config: &'a RunConfig,
    outputs: &'a [OutputRecord],
}

/// Collects the files of one run in its output directory.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

/// Write `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file()
        .sync_all()
        .map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> CliResult<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::config(format!("cannot serialize output: {e}")))?;
    bytes.push(b'\n');
    Ok(bytes)
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.records.retain(|r| r.file != name);
        self.records.push(OutputRecord {
            file: name.to_string(),
            bytes: bytes.len(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(
        &mut self,
        name: &str,
        value: &T,
    ) -> CliResult<PathBuf> {
        self.write(name, &to_json(value)?)
    }

    /// Render with a `Write`-based emitter, then write atomically.
    pub fn write_with(
        &mut self,
        name: &str,
        emit: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
    ) -> CliResult<PathBuf> {
        let mut buf = Vec::new();
        emit(&mut buf).map_err(|e| CliError::io(self.dir.join(name), e))?;
        self.write(name, &buf)
    }

    pub fn records(&self) -> &[OutputRecord] {
        &self.records
    }

    /// Write `config.toml`, `manifest.json` and `timing.json`.
    pub fn finish(
        mut self,
        subcommand: &str,
        config: &RunConfig,
        model: Option<&ModelInfo>,
        wall_time: Duration,
    ) -> CliResult<Vec<OutputRecord>> {
        let toml = config.to_toml()?;
        self.write(CONFIG_FILE, toml.as_bytes())?;
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            model,
            config,
            outputs: &self.records,
        };
        let bytes = to_json(&manifest)?;
        self.write(MANIFEST_FILE, &bytes)?;
        let timing = serde_json::json!({
            "subcommand": subcommand,
            "wall_time_s": wall_time.as_secs_f64(),
        });
        write_atomic(&self.dir.join(TIMING_FILE), &to_json(&timing)?)?;
        Ok(self.records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_atomic(&p, b"first").unwrap();
        write_atomic(&p, b"second").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_lists_outputs_with_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        out.write("x.csv", b"a,b\n1,2\n").unwrap();
        out.write("x.csv", b"a,b\n1,3\n").unwrap();
        let records = out
            .finish(
                "design",
                &RunConfig::default(),
                None,
                Duration::from_millis(5),
            )
            .unwrap();
        assert_eq!(records.iter().filter(|r| r.file == "x.csv").count(), 1);
        let manifest: serde_json::Value =
            serde_json::from_slice(&std::fs::read(dir.path().join(MANIFEST_FILE)).unwrap())
                .unwrap();
        assert_eq!(manifest["subcommand"], "design");
        assert_eq!(manifest["outputs"][0]["sha256"], sha256_hex(b"a,b\n1,3\n"));
        assert!(manifest["config"]["grid"]["points"].is_u64());
        assert!(dir.path().join(TIMING_FILE).exists());
    }
}
