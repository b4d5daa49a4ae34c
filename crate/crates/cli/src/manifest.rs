use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Loaded, RunConfig};

/// Everything needed to repeat a run: the command line, the digest of the
/// config file as read, and the fully resolved configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<String>,
    /// SHA-256 of the config bytes; absent when no file was given.
    pub config_sha256: Option<String>,
    pub seeds: Vec<u64>,
    pub variant: Option<String>,
    pub jobs: Option<usize>,
    pub out_dir: String,
    pub tool_version: String,
    pub resolved_config: RunConfig,
}

impl RunManifest {
    pub fn new(subcommand: &str, loaded: &Loaded, resolved: &RunConfig, out_dir: &Path) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: loaded.path.clone(),
            config_sha256: loaded.path.as_ref().map(|_| sha256_hex(&loaded.bytes)),
            seeds: Vec::new(),
            variant: None,
            jobs: None,
            out_dir: out_dir.display().to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            resolved_config: resolved.clone(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(out_dir.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
