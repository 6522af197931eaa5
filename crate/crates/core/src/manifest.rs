//! Run manifests: the inventory a command leaves behind so later commands
//! (and tests) can verify that nothing was altered.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::error::{Error, Result};
use crate::records::{read_json, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";

/// One produced file, identified by name relative to the manifest's
/// directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Inventory of a command's outputs plus enough context to reproduce
/// them: the resolved config digest, the artifact version, and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub artifact_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub created_unix_ms: u64,
    pub outputs: Vec<OutputRecord>,
    pub notes: Vec<String>,
}

/// Hex SHA-256 of a file's bytes.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(config_digest: String, seed: u64) -> Self {
        let created_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        RunManifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest,
            seed,
            created_unix_ms,
            outputs: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Digests `dir/name` and records it, replacing any earlier record of
    /// the same name.
    pub fn record_output(&mut self, dir: &Path, name: &str) -> Result<()> {
        let sha256 = file_digest(&dir.join(name))?;
        let bytes = fs::metadata(dir.join(name))
            .map_err(|e| Error::io(dir.join(name), e))?
            .len();
        self.outputs.retain(|o| o.name != name);
        self.outputs.push(OutputRecord {
            name: name.to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn output(&self, name: &str) -> Option<&OutputRecord> {
        self.outputs.iter().find(|o| o.name == name)
    }

    /// Writes `dir/manifest.json` with the inventory sorted by name.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.outputs.sort_by(|a, b| a.name.cmp(&b.name));
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }

    /// Recomputes every recorded digest against the files in `dir`.
    ///
    /// # Errors
    ///
    /// Names the first missing or altered file in an integrity error.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for record in &self.outputs {
            let path = dir.join(&record.name);
            if !path.is_file() {
                return Err(Error::Integrity(format!(
                    "{}: listed in the manifest but missing",
                    record.name
                )));
            }
            let actual = file_digest(&path)?;
            if actual != record.sha256 {
                return Err(Error::Integrity(format!(
                    "{}: content digest {} does not match the manifest's {}",
                    record.name, actual, record.sha256
                )));
            }
        }
        Ok(())
    }
}
