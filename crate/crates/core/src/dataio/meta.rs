//! JSON sidecars recording the seed and configuration behind an artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactMeta {
    pub artifact: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    /// SHA-256 (hex) of each input file, keyed by role.
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

impl ArtifactMeta {
    pub fn new(artifact: impl Into<String>, seed: u64, config: &impl Serialize) -> Self {
        let config = serde_json::to_value(config).expect("config serializes");
        Self {
            artifact: artifact.into(),
            seed,
            config_hash: config_hash(&config),
            config,
            inputs: BTreeMap::new(),
        }
    }

    pub fn with_input(mut self, role: impl Into<String>, bytes: &[u8]) -> Self {
        self.inputs.insert(role.into(), hex::encode(Sha256::digest(bytes)));
        self
    }
}

/// SHA-256 (hex) of the compact JSON encoding of `config`.
pub fn config_hash(config: &impl Serialize) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// `<path>.meta.json`
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

pub fn write_sidecar(artifact: &Path, meta: &ArtifactMeta) -> Result<()> {
    let path = sidecar_path(artifact);
    let mut text = serde_json::to_string_pretty(meta).expect("meta serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_sidecar(artifact: &Path) -> Result<ArtifactMeta> {
    let path = sidecar_path(artifact);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
        path,
    })
}
