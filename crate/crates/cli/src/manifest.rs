use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

/// Provenance record written next to every output artifact.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool_version: &'static str,
    pub subcommand: String,
    pub config: serde_json::Value,
    pub master_seed: Option<u64>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    /// SHA-256 (hex) of each input file.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 (hex) of each output file.
    pub outputs: BTreeMap<String, String>,
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub struct ManifestBuilder {
    subcommand: String,
    config: serde_json::Value,
    master_seed: Option<u64>,
    started: u128,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl ManifestBuilder {
    pub fn new(subcommand: &str, config: serde_json::Value, master_seed: Option<u64>) -> Self {
        ManifestBuilder {
            subcommand: subcommand.to_string(),
            config,
            master_seed,
            started: now_ms(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    fn digests(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
        paths.iter().map(|p| Ok((p.display().to_string(), sha256_file(p)?))).collect()
    }

    pub fn finish(self) -> Result<RunManifest> {
        Ok(RunManifest {
            manifest_version: MANIFEST_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand: self.subcommand,
            config: self.config,
            master_seed: self.master_seed,
            started_unix_ms: self.started,
            finished_unix_ms: now_ms(),
            inputs: Self::digests(&self.inputs)?,
            outputs: Self::digests(&self.outputs)?,
        })
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let manifest = self.finish()?;
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

/// `<file>.manifest.json` next to a single-file artifact.
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}
