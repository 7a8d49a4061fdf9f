//! Content-addressed run manifests and crash-safe file writes.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Git-style object id: SHA-256 of `blob <len>\0` followed by the bytes.
pub fn content_address(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::Invariant(e.to_string()))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the run directory.
    pub path: String,
    pub id: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started_unix_ms: u64,
    pub elapsed_ms: u64,
}

/// Headline numbers of one run, kept so a resumed campaign need not reparse
/// the artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub particles: usize,
    pub max_fluctuation: f64,
    pub max_early: f64,
    pub max_late: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub m: u32,
    pub trial: usize,
    pub seed: u64,
    pub artifacts: Vec<Artifact>,
    pub summary: RunSummary,
    pub timing: Timing,
}

/// Collects a run's artifacts, then seals them with a manifest. The manifest
/// is written last, so a directory without one is an incomplete run.
pub struct RunWriter {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    started: SystemTime,
    clock: Instant,
}

impl RunWriter {
    pub fn new(dir: PathBuf) -> CliResult<Self> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        // A stale manifest must not vouch for artifacts about to be replaced.
        let stale = dir.join(MANIFEST_FILE);
        if stale.exists() {
            std::fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
        }
        Ok(RunWriter {
            dir,
            artifacts: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    pub fn add(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.artifacts.push(Artifact {
            path: name.into(),
            id: content_address(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    pub fn finish(
        self,
        config_hash: &str,
        m: u32,
        trial: usize,
        seed: u64,
        summary: RunSummary,
    ) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            config_hash: config_hash.into(),
            m,
            trial,
            seed,
            artifacts: self.artifacts,
            summary,
            timing: Timing {
                started_unix_ms: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map_or(0, |d| d.as_millis() as u64),
                elapsed_ms: self.clock.elapsed().as_millis() as u64,
            },
        };
        write_json(&self.dir.join(MANIFEST_FILE), &manifest)?;
        Ok(manifest)
    }
}

/// The manifest in `dir` if it matches `config_hash` and `seed` and every
/// artifact it lists is present with the recorded content address.
pub fn load_completed(dir: &Path, config_hash: &str, seed: u64) -> Option<RunManifest> {
    let bytes = std::fs::read(dir.join(MANIFEST_FILE)).ok()?;
    let manifest: RunManifest = serde_json::from_slice(&bytes).ok()?;
    if manifest.config_hash != config_hash || manifest.seed != seed {
        return None;
    }
    for a in &manifest.artifacts {
        let data = std::fs::read(dir.join(&a.path)).ok()?;
        if content_address(&data) != a.id {
            log::warn!(
                "{}: artifact {} changed since the run; rerunning",
                dir.display(),
                a.path
            );
            return None;
        }
    }
    Some(manifest)
}
