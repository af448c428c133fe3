//! `manifest.json` in the work directory: one entry per stage with the
//! config hash, seed, checksums of every input and output, and counts.
//! Contains no timestamps or absolute paths, so identical runs produce
//! identical bytes.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::LoadedConfig;
use crate::CliError;

pub const FILE_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_sha256: String,
    pub seed: u64,
    pub provider_tag: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counts: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Default for Manifest {
    fn default() -> Self {
        Self {
            format: "forge-manifest".into(),
            version: 1,
            stages: BTreeMap::new(),
        }
    }
}

pub fn checksum(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(forge_core::sha256_hex(&bytes))
}

/// Builds a stage record by hashing the named files now.
pub fn record(
    cfg: &LoadedConfig,
    provider_tag: &str,
    inputs: &[&Path],
    outputs: &[&Path],
    counts: Value,
) -> Result<StageRecord, CliError> {
    let hash_all = |paths: &[&Path]| -> Result<BTreeMap<String, String>, CliError> {
        paths.iter().map(|p| Ok((cfg.display(p), checksum(p)?))).collect()
    };
    Ok(StageRecord {
        config_sha256: cfg.hash.clone(),
        seed: cfg.config.seed,
        provider_tag: provider_tag.to_string(),
        inputs: hash_all(inputs)?,
        outputs: hash_all(outputs)?,
        counts,
    })
}

/// Read-modify-write of the work directory's manifest.
pub fn update(work_dir: &Path, stage: &str, rec: StageRecord) -> Result<(), CliError> {
    let path = work_dir.join(FILE_NAME);
    let mut manifest = match std::fs::read(&path) {
        Ok(bytes) => serde_json::from_slice(&bytes).unwrap_or_else(|e| {
            tracing::warn!(error = %e, "unreadable manifest, starting a new one");
            Manifest::default()
        }),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Manifest::default(),
        Err(e) => return Err(CliError::io(&path, e)),
    };
    manifest.stages.insert(stage.to_string(), rec);
    crate::write_json(&path, &manifest)
}
