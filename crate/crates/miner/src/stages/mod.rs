//! Pipeline stages and the runner that sequences, skips and records them.

mod analysis;
mod annotate;
mod corpus;
mod predict;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{PipelineError, Result};
use crate::manifest::{file_digest, Action, OutputDigest, RunLock, RunManifest, StageRecord, TOOL_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Match,
    Contexts,
    Sample,
    AnnotateExport,
    AnnotateImport,
    Predict,
    Evaluate,
    Analyze,
    Export,
}

impl Stage {
    pub const ALL: [Stage; 10] = [
        Stage::Ingest,
        Stage::Match,
        Stage::Contexts,
        Stage::Sample,
        Stage::AnnotateExport,
        Stage::AnnotateImport,
        Stage::Predict,
        Stage::Evaluate,
        Stage::Analyze,
        Stage::Export,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Match => "match",
            Stage::Contexts => "contexts",
            Stage::Sample => "sample",
            Stage::AnnotateExport => "annotate-export",
            Stage::AnnotateImport => "annotate-import",
            Stage::Predict => "predict",
            Stage::Evaluate => "evaluate",
            Stage::Analyze => "analyze",
            Stage::Export => "export",
        }
    }

    pub fn dependencies(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Match => &[Stage::Ingest],
            Stage::Contexts => &[Stage::Ingest, Stage::Match],
            Stage::Sample => &[Stage::Contexts],
            Stage::AnnotateExport => &[Stage::Sample],
            Stage::AnnotateImport => &[Stage::Contexts],
            Stage::Predict => &[Stage::Contexts],
            Stage::Evaluate => &[Stage::Contexts, Stage::AnnotateImport, Stage::Predict],
            Stage::Analyze => &[Stage::Ingest, Stage::Match, Stage::Contexts, Stage::Predict],
            Stage::Export => &[Stage::Analyze],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// Files under the run directory, one subdirectory per stage.
pub mod paths {
    pub const DOCUMENTS: &str = "ingest/documents.jsonl";
    pub const INGEST_DIAGNOSTICS: &str = "ingest/diagnostics.jsonl";
    pub const MENTIONS: &str = "match/mentions.jsonl";
    pub const CONTEXTS: &str = "contexts/contexts.jsonl";
    pub const TASKS: &str = "sample/tasks.json";
    pub const LABELING_TASKS: &str = "annotate-export/labeling_tasks.json";
    pub const GOLD: &str = "annotate-import/gold.jsonl";
    pub const PREDICTIONS: &str = "predict/predictions.jsonl";
    pub const CHECKPOINT: &str = "predict/checkpoint.jsonl";
    pub const SPLIT_TRAIN: &str = "evaluate/train.jsonl";
    pub const SPLIT_TEST: &str = "evaluate/test.jsonl";
    pub const SPLIT_VALIDATION: &str = "evaluate/validation.jsonl";
    pub const REPORT: &str = "evaluate/report.json";
    pub const ANALYSIS: &str = "analyze/analysis.json";
    pub const METADATA_CACHE: &str = "cache/metadata";
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Skipped,
    Resumed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageReport {
    pub stage: Stage,
    pub outcome: Outcome,
    pub counts: BTreeMap<String, serde_json::Value>,
}

/// What a stage produced.
#[derive(Debug, Default)]
pub(crate) struct StageOutput {
    /// Absolute paths of the files written.
    pub files: Vec<PathBuf>,
    pub counts: BTreeMap<String, serde_json::Value>,
    pub resumed: bool,
}

impl StageOutput {
    pub fn count(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.counts.insert(key.to_string(), value.into());
    }
}

/// Seed for one stage, derived from the run seed by stable hashing.
pub fn sub_seed(seed: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stage.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1).into())
        })
        .collect()
}

pub(crate) fn jsonl_bytes<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it)?;
        out.push(b'\n');
    }
    Ok(out)
}

pub(crate) fn pretty_json<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Digest builder for a stage's inputs.
pub(crate) struct InputDigest(Sha256);

impl InputDigest {
    fn new(stage: Stage) -> Self {
        let mut h = Sha256::new();
        h.update(stage.name().as_bytes());
        h.update([0]);
        h.update(TOOL_VERSION.as_bytes());
        h.update([0]);
        Self(h)
    }

    pub fn value<T: Serialize + ?Sized>(&mut self, label: &str, v: &T) -> Result<()> {
        self.0.update(label.as_bytes());
        self.0.update([0]);
        self.0.update(serde_json::to_vec(v)?);
        self.0.update([0]);
        Ok(())
    }

    pub fn file(&mut self, path: &Path) -> Result<()> {
        let d = file_digest(path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
        self.0.update(d.as_bytes());
        self.0.update([0]);
        Ok(())
    }

    fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}

pub struct Runner {
    cfg: PipelineConfig,
    run_dir: PathBuf,
    force: bool,
    pool: rayon::ThreadPool,
    manifest: RunManifest,
    _lock: RunLock,
}

impl Runner {
    pub fn open(cfg: PipelineConfig, run_dir: PathBuf, force: bool, workers: Option<usize>) -> Result<Self> {
        let workers = workers
            .or(cfg.workers)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
        if workers == 0 {
            return Err(PipelineError::Config("workers must be positive".into()));
        }
        let lock = RunLock::acquire(&run_dir).map_err(|e| PipelineError::Dependency(e.to_string()))?;
        let manifest = RunManifest::load_or_new(&run_dir, &cfg.hash())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| anyhow::anyhow!("thread pool: {e}"))?;
        Ok(Self {
            cfg,
            run_dir,
            force,
            pool,
            manifest,
            _lock: lock,
        })
    }

    pub fn run_dir(&self) -> &Path {
        &self.run_dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub(crate) fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub(crate) fn force(&self) -> bool {
        self.force
    }

    pub(crate) fn path(&self, rel: &str) -> PathBuf {
        self.run_dir.join(rel)
    }

    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Write an output atomically and remember it.
    pub(crate) fn emit(&self, out: &mut StageOutput, path: PathBuf, bytes: &[u8]) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        miner_core::fsutil::write_atomic(&path, bytes)?;
        out.files.push(path);
        Ok(())
    }

    fn relative(&self, path: &Path) -> String {
        path.strip_prefix(&self.run_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .replace('\\', "/")
    }

    fn check_dependencies(&self, stage: Stage) -> Result<()> {
        for &dep in stage.dependencies() {
            if self.manifest.record(dep.name()).is_none() {
                return Err(PipelineError::Dependency(format!(
                    "stage `{stage}` needs `{dep}` to complete first; run `miner {dep}`"
                )));
            }
            if let Err(m) = self.manifest.verify(&self.run_dir, dep.name()) {
                return Err(PipelineError::Dependency(format!(
                    "digest mismatch in stage `{}` output {}: {}; re-run `miner {} --force` to rebuild it",
                    m.stage, m.path, m.reason, m.stage
                )));
            }
        }
        Ok(())
    }

    fn input_digest(&self, stage: Stage) -> Result<String> {
        let mut d = InputDigest::new(stage);
        for &dep in stage.dependencies() {
            let rec = self.manifest.record(dep.name()).expect("dependencies checked");
            d.value(dep.name(), &rec.output_digest)?;
        }
        match stage {
            Stage::Ingest => corpus::ingest_inputs(self, &mut d)?,
            Stage::Match => d.file(&self.cfg.registry.path)?,
            Stage::Contexts | Stage::AnnotateExport => {}
            Stage::Sample => {
                d.value("seed", &self.cfg.seed)?;
                d.value("sample", &self.cfg.sample)?;
            }
            Stage::AnnotateImport => match &self.cfg.annotations.path {
                Some(p) => d.file(p)?,
                None => {
                    return Err(PipelineError::Config(
                        "annotate-import needs annotations.path in the config".into(),
                    ))
                }
            },
            Stage::Predict => predict::inputs(self, &mut d)?,
            Stage::Evaluate => {
                d.value("seed", &self.cfg.seed)?;
                d.value("evaluate", &self.cfg.evaluate)?;
            }
            Stage::Analyze => {
                d.value("analytics", &self.cfg.analytics)?;
                d.file(&self.cfg.registry.path)?;
            }
            Stage::Export => d.value("dir", &self.export_dir())?,
        }
        Ok(d.finish())
    }

    pub(crate) fn export_dir(&self) -> PathBuf {
        self.cfg.export.dir.clone().unwrap_or_else(|| self.run_dir.join("export"))
    }

    /// Run one stage unless it is already complete for the same inputs.
    pub fn run_stage(&mut self, stage: Stage) -> Result<StageReport> {
        self.check_dependencies(stage)?;
        let input_digest = self.input_digest(stage)?;
        if let Some(rec) = self.manifest.record(stage.name()) {
            if rec.input_digest == input_digest && !self.force {
                if let Err(m) = self.manifest.verify(&self.run_dir, stage.name()) {
                    return Err(PipelineError::Dependency(format!(
                        "digest mismatch in stage `{stage}` output {}: {}; re-run with --force to recompute",
                        m.path, m.reason
                    )));
                }
                let counts = rec.counts.clone();
                tracing::info!(%stage, "up to date, skipping");
                self.manifest.note(stage.name(), Action::Skipped);
                self.manifest.save(&self.run_dir)?;
                return Ok(StageReport {
                    stage,
                    outcome: Outcome::Skipped,
                    counts,
                });
            }
        }

        tracing::info!(%stage, "running");
        let started = Utc::now();
        let out = match stage {
            Stage::Ingest => corpus::ingest(self)?,
            Stage::Match => corpus::match_mentions(self)?,
            Stage::Contexts => corpus::contexts(self)?,
            Stage::Sample => annotate::sample(self)?,
            Stage::AnnotateExport => annotate::export_tasks(self)?,
            Stage::AnnotateImport => annotate::import(self)?,
            Stage::Predict => predict::predict(self, &input_digest)?,
            Stage::Evaluate => analysis::evaluate(self)?,
            Stage::Analyze => analysis::analyze(self)?,
            Stage::Export => analysis::export(self)?,
        };

        let mut outputs = Vec::with_capacity(out.files.len());
        for f in &out.files {
            outputs.push(OutputDigest {
                path: self.relative(f),
                sha256: file_digest(f)?,
            });
        }
        if let Some(prev) = self.manifest.record(stage.name()) {
            for old in &prev.outputs {
                if !outputs.iter().any(|o| o.path == old.path) {
                    let _ = fs::remove_file(self.run_dir.join(&old.path));
                }
            }
        }
        let action = if out.resumed {
            Action::Resumed
        } else if self.force && self.manifest.record(stage.name()).is_some() {
            Action::Forced
        } else {
            Action::Ran
        };
        self.manifest.upsert(StageRecord {
            stage: stage.name().to_string(),
            input_digest,
            output_digest: StageRecord::combine(&outputs),
            outputs,
            started,
            finished: Utc::now(),
            counts: out.counts.clone(),
        });
        self.manifest.note(stage.name(), action);
        self.manifest.save(&self.run_dir)?;
        Ok(StageReport {
            stage,
            outcome: if out.resumed { Outcome::Resumed } else { Outcome::Ran },
            counts: out.counts,
        })
    }
}
