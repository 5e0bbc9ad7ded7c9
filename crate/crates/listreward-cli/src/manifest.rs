//! Run manifests: every mutating command records its config, input
//! checksums, and timestamps so outputs can be reproduced.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// path -> sha256 hex digest of each input file.
    pub input_checksums: BTreeMap<String, String>,
    pub started: DateTime<Utc>,
    pub finished: Option<DateTime<Utc>>,
    pub toolkit_version: String,
    /// Set when a command flushed partial results before failing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed: Option<String>,
}

impl RunManifest {
    pub fn start(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            config,
            input_checksums: BTreeMap::new(),
            started: Utc::now(),
            finished: None,
            toolkit_version: crate::VERSION.to_string(),
            failed: None,
        }
    }

    pub fn checksum_input(&mut self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let path = path.as_ref();
        let bytes = std::fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        self.input_checksums
            .insert(path.display().to_string(), hex::encode(digest));
        Ok(())
    }

    pub fn finish(&mut self) {
        self.finished = Some(Utc::now());
    }

    pub fn mark_failed(&mut self, reason: impl Into<String>) {
        self.failed = Some(reason.into());
        self.finish();
    }

    pub fn write(&self, out_dir: impl AsRef<Path>) -> std::io::Result<()> {
        let path = out_dir.as_ref().join("manifest.json");
        std::fs::write(path, serde_json::to_string_pretty(self).unwrap())
    }
}
