use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Provenance record written alongside every run's outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<PathBuf>,
    pub seed: u64,
    pub tool_version: String,
    /// SHA-256 of every input file, keyed by path.
    pub input_hashes: BTreeMap<String, String>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config_paths: Vec::new(),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_hashes: BTreeMap::new(),
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.input_hashes.insert(path.display().to_string(), sha256_hex(bytes));
    }

    pub fn config(&mut self, path: &Path, bytes: &[u8]) {
        self.config_paths.push(path.to_path_buf());
        self.input(path, bytes);
    }

    /// `<output>.manifest.json` when there is an output file, stderr otherwise.
    pub fn emit(&self, output: Option<&Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        match output {
            Some(out) => {
                let mut name = out.as_os_str().to_owned();
                name.push(".manifest.json");
                std::fs::write(PathBuf::from(name), text + "\n")
            }
            None => {
                eprintln!("{text}");
                Ok(())
            }
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
