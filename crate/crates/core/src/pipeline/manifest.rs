use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::hex;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Completion record of one stage. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct StageRecord {
    pub config_hash: String,
    /// Consumed artifacts and their SHA-256 at the time of the run.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loaded_groups: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub config_hash: String,
    /// Effective configuration of the most recent stage run.
    pub config: BTreeMap<String, String>,
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn load_or_default(out_dir: &Path) -> Result<Self> {
        let path = out_dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(Manifest::default());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.clone(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Checks that `stage` completed under `config_hash` and that each of its
    /// outputs is unchanged on disk.
    pub fn require(&self, out_dir: &Path, stage: &str, expected_output: &str, config_hash: &str) -> Result<&StageRecord> {
        let missing = |reason: String| Error::MissingArtifact {
            path: out_dir.join(expected_output),
            reason,
        };
        let rec = self
            .stages
            .get(stage)
            .ok_or_else(|| missing(format!("stage `{stage}` has not been run")))?;
        if rec.config_hash != config_hash {
            return Err(Error::StaleArtifact {
                path: out_dir.join(expected_output),
                reason: format!(
                    "stage `{stage}` ran with config {} but the current config is {config_hash}",
                    rec.config_hash
                ),
            });
        }
        for (rel, digest) in &rec.outputs {
            let path = out_dir.join(rel);
            if !path.exists() {
                return Err(Error::MissingArtifact {
                    path,
                    reason: format!("output of stage `{stage}` was removed"),
                });
            }
            if &file_sha256(&path)? != digest {
                return Err(Error::StaleArtifact {
                    path,
                    reason: format!("modified after stage `{stage}` wrote it"),
                });
            }
        }
        Ok(rec)
    }
}

/// Digests of the given output-relative paths.
pub fn digests(out_dir: &Path, rels: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    rels.iter()
        .map(|r| Ok((r.to_string_lossy().into_owned(), file_sha256(&out_dir.join(r))?)))
        .collect()
}
