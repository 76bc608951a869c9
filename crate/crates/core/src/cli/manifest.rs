//! Run manifests: every command records what it ran, on which inputs
//! (content-hashed), producing which outputs (content-hashed), under which
//! seed and thread count. Re-running a manifest's command with the same
//! inputs must reproduce hash-identical outputs; only the manifest's own
//! timestamp field may differ.

use crate::error::Result;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// The subcommand and its arguments as invoked.
    pub command: Vec<String>,
    /// Fully resolved configuration echo.
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    /// input path -> sha256 of file contents
    pub inputs: BTreeMap<String, String>,
    /// output path -> sha256 of file contents
    pub outputs: BTreeMap<String, String>,
    pub software_version: String,
    pub wall_time_s: f64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(sha256_bytes(&bytes))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn new(command: Vec<String>, config: serde_json::Value, seed: Option<u64>, threads: usize) -> Self {
        RunManifest {
            command,
            config,
            seed,
            threads,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Write the manifest next to an artifact as `<artifact>.manifest.json`
    /// or into a directory as `manifest.json`.
    pub fn write(&self, target: &Path) -> Result<()> {
        let path = if target.is_dir() {
            target.join("manifest.json")
        } else {
            let mut name = target.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            target.with_file_name(name)
        };
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}
