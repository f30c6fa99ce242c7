//! Run manifests and content hashes.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub command: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
    /// SHA-256 over a git-style blob header and the input bytes.
    pub input_hash: String,
}

impl RunManifest {
    pub fn load(dir: &Path) -> anyhow::Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path)
            .map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// `sha256("blob <len>\0" || parts...)`, hex encoded.
pub fn content_hash(parts: &[&[u8]]) -> String {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut h = Sha256::new();
    h.update(format!("blob {len}\0").as_bytes());
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}
