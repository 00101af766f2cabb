//! Run manifests: what produced an output directory and what it contains.
//!
//! A manifest holds no timestamps or host details, so reruns with the same
//! config and seed write identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::{config_error, sha256_hex};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Hash of the simulation manifest whose data were used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_manifest: Option<String>,
    /// Hash of the fit manifest whose samples were evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_manifest: Option<String>,
    /// Output file name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash.to_string(),
            seed,
            model: None,
            data_manifest: None,
            samples_manifest: None,
            files: BTreeMap::new(),
        }
    }

    /// Hashes every regular file in `dir` except the manifest itself and
    /// writes the manifest there.
    pub fn finish(mut self, dir: &Path) -> Result<()> {
        self.files.clear();
        for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
            let entry = entry?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == MANIFEST_FILE || !entry.file_type()?.is_file() {
                continue;
            }
            let bytes = std::fs::read(entry.path())?;
            self.files.insert(name, sha256_hex(&bytes));
        }
        let json = serde_json::to_string_pretty(&self)? + "\n";
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))
    }
}

/// Reads the manifest in `dir` together with the hash of its bytes.
pub fn read_manifest(dir: &Path) -> Result<(Manifest, String)> {
    let path = dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path)
        .map_err(|e| config_error(format!("{} has no readable manifest: {e}", dir.display())))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| config_error(format!("invalid manifest {}: {e}", path.display())))?;
    Ok((manifest, sha256_hex(&bytes)))
}
