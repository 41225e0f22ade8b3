//! Executes a scenario, writes its artifacts and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use kinshock::{Error, Result};

use crate::config::{RunConfig, Scenario};
use crate::scenarios::{run_scenario, worker_count, Status, Verdict};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub scenario: Scenario,
    pub version: String,
    pub config: RunConfig,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub verdicts: Vec<Verdict>,
    pub pass: bool,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| v.status == Status::Fail)
    }

    pub fn digest_of(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.sha256.as_str())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Runs `scenario` and writes every artifact plus `manifest.json` into
/// `out_dir` (created if missing). Errors are reserved for configuration
/// and I/O problems; numerical failures are verdicts.
pub fn run(scenario: Scenario, cfg: &RunConfig, out_dir: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let workers = worker_count(cfg).map_err(|m| Error::Validation(vec![m]))?;
    let model = cfg.build_model()?;
    let outcome = run_scenario(scenario, cfg, &model, workers);
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let mut files = Vec::new();
    for (name, contents) in &outcome.files {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        files.push(FileEntry {
            name: name.clone(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
    }
    let pass = outcome.verdicts.iter().all(|v| v.status != Status::Fail);
    let manifest = RunManifest {
        scenario,
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        workers,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        verdicts: outcome.verdicts,
        pass,
        files,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, json + "\n").map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(manifest)
}

/// Output directory: the command line wins over the config.
pub fn resolve_out_dir(cfg: &RunConfig, cli: Option<PathBuf>) -> PathBuf {
    cli.unwrap_or_else(|| cfg.out_dir.clone())
}
