//! Run manifests: canonical config hashing and output digests, so identical
//! configs are verifiably reproducible.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub toolkit_version: String,
    pub outputs: Vec<OutputRecord>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Canonical form of a config: parsed value re-serialized compactly with
/// sorted keys and normalized numbers, then hashed.
pub fn canonical_config_hash(value: &serde_json::Value) -> String {
    // serde_json maps are ordered, so serialization is already canonical.
    sha256_hex(value.to_string().as_bytes())
}

impl RunManifest {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: Vec::new(),
        }
    }

    /// Record a written file; call in emission order, then sort.
    pub fn record(&mut self, path: &Path, bytes: &[u8]) {
        self.outputs.push(OutputRecord {
            path: path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn finalize(&mut self) {
        self.outputs.sort_by(|a, b| a.path.cmp(&b.path));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| HarnessError::Config(e.to_string()))?
            + "\n";
        fs::write(path, body).map_err(|e| HarnessError::io(path.display().to_string(), e))
    }

    /// Digest over the sorted output records (ignores the version string).
    pub fn outputs_digest(&self) -> String {
        let mut acc = String::new();
        for record in &self.outputs {
            acc.push_str(&record.path);
            acc.push(':');
            acc.push_str(&record.sha256);
            acc.push('\n');
        }
        sha256_hex(acc.as_bytes())
    }
}
