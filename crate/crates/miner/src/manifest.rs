//! Run bookkeeping: the manifest of completed stages and the run-directory
//! lock.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use miner_core::fsutil::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOCK_FILE: &str = ".lock";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Hex sha256 of a file's bytes.
pub fn file_digest(path: &Path) -> io::Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    /// Relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub input_digest: String,
    pub output_digest: String,
    pub outputs: Vec<OutputDigest>,
    pub started: DateTime<Utc>,
    pub finished: DateTime<Utc>,
    pub counts: BTreeMap<String, serde_json::Value>,
}

impl StageRecord {
    /// Combined digest over a stage's outputs.
    pub fn combine(outputs: &[OutputDigest]) -> String {
        let mut h = Sha256::new();
        for o in outputs {
            h.update(o.path.as_bytes());
            h.update([0]);
            h.update(o.sha256.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Ran,
    Skipped,
    Forced,
    Resumed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub stage: String,
    pub action: Action,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config_hash: String,
    pub tool_version: String,
    pub stage_records: Vec<StageRecord>,
    #[serde(default)]
    pub history: Vec<HistoryEntry>,
}

/// Where one output on disk disagrees with its record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestMismatch {
    pub stage: String,
    pub path: String,
    pub reason: String,
}

impl RunManifest {
    pub fn new(config_hash: &str) -> Self {
        let now = Utc::now();
        Self {
            run_id: format!("{}-{}", now.format("%Y%m%dT%H%M%SZ"), &config_hash[..8.min(config_hash.len())]),
            config_hash: config_hash.to_string(),
            tool_version: TOOL_VERSION.to_string(),
            stage_records: Vec::new(),
            history: Vec::new(),
        }
    }

    pub fn load_or_new(run_dir: &Path, config_hash: &str) -> anyhow::Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        match fs::read(&path) {
            Ok(bytes) => {
                let mut m: RunManifest = serde_json::from_slice(&bytes)
                    .map_err(|e| anyhow::anyhow!("unreadable manifest {}: {e}", path.display()))?;
                m.config_hash = config_hash.to_string();
                m.tool_version = TOOL_VERSION.to_string();
                Ok(m)
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Self::new(config_hash)),
            Err(e) => Err(anyhow::anyhow!("cannot read {}: {e}", path.display())),
        }
    }

    pub fn save(&self, run_dir: &Path) -> anyhow::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&run_dir.join(MANIFEST_FILE), &bytes)?;
        Ok(())
    }

    pub fn record(&self, stage: &str) -> Option<&StageRecord> {
        self.stage_records.iter().find(|r| r.stage == stage)
    }

    /// Replace the record for its stage.
    pub fn upsert(&mut self, record: StageRecord) {
        self.stage_records.retain(|r| r.stage != record.stage);
        self.stage_records.push(record);
    }

    pub fn note(&mut self, stage: &str, action: Action) {
        self.history.push(HistoryEntry {
            stage: stage.to_string(),
            action,
            at: Utc::now(),
        });
    }

    /// Check a stage's recorded outputs against the files on disk.
    pub fn verify(&self, run_dir: &Path, stage: &str) -> Result<(), DigestMismatch> {
        let Some(rec) = self.record(stage) else {
            return Err(DigestMismatch {
                stage: stage.to_string(),
                path: String::new(),
                reason: "stage has not been run".into(),
            });
        };
        for o in &rec.outputs {
            let reason = match file_digest(&run_dir.join(&o.path)) {
                Ok(d) if d == o.sha256 => continue,
                Ok(_) => "content differs from the recorded digest".to_string(),
                Err(e) => format!("cannot read: {e}"),
            };
            return Err(DigestMismatch {
                stage: stage.to_string(),
                path: o.path.clone(),
                reason,
            });
        }
        Ok(())
    }
}

/// Exclusive ownership of a run directory for the life of the value.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

fn pid_alive(pid: u32) -> bool {
    let proc_root = Path::new("/proc");
    !proc_root.is_dir() || proc_root.join(pid.to_string()).exists()
}

impl RunLock {
    pub fn acquire(run_dir: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(run_dir)?;
        let path = run_dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    let owner = fs::read_to_string(&path).ok().and_then(|s| s.trim().parse::<u32>().ok());
                    match owner {
                        Some(pid) if pid_alive(pid) => {
                            anyhow::bail!("run directory {} is locked by process {pid}", run_dir.display())
                        }
                        _ => {
                            tracing::warn!(lock = %path.display(), "removing stale lock");
                            fs::remove_file(&path)?;
                        }
                    }
                }
                Err(e) => return Err(e.into()),
            }
        }
        anyhow::bail!("could not lock {}", run_dir.display())
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}
