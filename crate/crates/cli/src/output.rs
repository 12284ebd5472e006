//! Manifest construction and the single-threaded write of a finished run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::experiments::{tolerances, Outcome};
use crate::scenario::{Scenario, SeedSource};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Everything needed to reproduce and audit a run. Contains no timestamps, so
/// reruns produce an identical manifest.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub kind: &'static str,
    pub seed: u64,
    pub seed_source: SeedSource,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub tolerances: serde_json::Value,
    pub results: serde_json::Value,
    pub outputs: Vec<OutputEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest(s: &Scenario, outcome: &Outcome) -> Manifest {
    Manifest {
        name: s.name.clone(),
        kind: s.kind.name(),
        seed: s.seed,
        seed_source: s.seed_source,
        version: env!("CARGO_PKG_VERSION"),
        config: s.config.clone(),
        tolerances: tolerances(s.kind),
        results: outcome.results.clone(),
        outputs: outcome
            .artifacts
            .iter()
            .map(|a| OutputEntry { file: a.file.clone(), sha256: sha256_hex(&a.bytes), bytes: a.bytes.len() })
            .collect(),
    }
}

/// Writes every artifact and then the manifest into `dir`, returning the written paths.
pub fn write(dir: &Path, s: &Scenario, outcome: &Outcome) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for a in &outcome.artifacts {
        let path = dir.join(&a.file);
        fs::write(&path, &a.bytes).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
        written.push(path);
    }
    let mut text = serde_json::to_string_pretty(&manifest(s, outcome)).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))?;
    written.push(path);
    Ok(written)
}
