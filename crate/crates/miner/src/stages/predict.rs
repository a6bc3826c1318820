use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use miner_core::context::ContextWindow;
use miner_core::intent::{classify, BaselineClassifier, ClassifierPlugin, ClassifyOptions, HttpClassifier, Prediction, NUM_LABELS};
use serde::{Deserialize, Serialize};

use super::{jsonl_bytes, paths, read_jsonl, InputDigest, Runner, StageOutput};
use crate::config::{ClassifierConfig, ClassifierMode};
use crate::error::{PipelineError, Result};

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    input_digest: String,
}

pub(super) fn inputs(runner: &Runner, d: &mut InputDigest) -> Result<()> {
    let c = &runner.config().classifier;
    d.value("mode", &c.mode)?;
    d.value("endpoint", &c.endpoint)?;
    d.value("truncation", &c.truncation)?;
    d.value("max_len", &c.max_len)
}

pub fn plugin_for(cfg: &ClassifierConfig) -> Result<Box<dyn ClassifierPlugin>> {
    Ok(match cfg.mode {
        ClassifierMode::Baseline => Box::new(BaselineClassifier),
        ClassifierMode::Service => {
            let endpoint = cfg
                .endpoint
                .as_deref()
                .ok_or_else(|| PipelineError::Config("classifier.endpoint is not set".into()))?;
            Box::new(HttpClassifier::new(endpoint, Duration::from_secs(cfg.timeout_secs)))
        }
    })
}

/// Predictions from a checkpoint written for the same inputs, provided they
/// cover a prefix of `contexts`. Anything else is discarded.
fn load_checkpoint(path: &Path, input_digest: &str, contexts: &[ContextWindow]) -> Vec<Prediction> {
    let Ok(text) = fs::read_to_string(path) else {
        return Vec::new();
    };
    let mut lines = text.lines();
    match lines.next().and_then(|l| serde_json::from_str::<CheckpointHeader>(l).ok()) {
        Some(h) if h.input_digest == input_digest => {}
        _ => return Vec::new(),
    }
    let mut done = Vec::new();
    for line in lines {
        // A torn final line from an interrupted append ends the prefix.
        let Ok(p) = serde_json::from_str::<Prediction>(line) else { break };
        match contexts.get(done.len()) {
            Some(c) if c.context_id == p.context_id => done.push(p),
            _ => return Vec::new(),
        }
    }
    done
}

fn append(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut f = OpenOptions::new().append(true).open(path)?;
    f.write_all(&jsonl_bytes(preds)?)?;
    f.sync_data()?;
    Ok(())
}

pub(super) fn predict(runner: &Runner, input_digest: &str) -> Result<StageOutput> {
    let cfg = &runner.config().classifier;
    let contexts: Vec<ContextWindow> = read_jsonl(&runner.path(paths::CONTEXTS))?;
    let plugin = plugin_for(cfg)?;
    let health = plugin.health().map_err(PipelineError::from)?;
    if !health.is_ok() {
        return Err(PipelineError::External(format!("classifier reports status {:?}", health.status)));
    }

    let checkpoint = runner.path(paths::CHECKPOINT);
    let mut done = if runner.force() {
        Vec::new()
    } else {
        load_checkpoint(&checkpoint, input_digest, &contexts)
    };
    let resumed = !done.is_empty();
    if resumed {
        tracing::info!(completed = done.len(), total = contexts.len(), "resuming from checkpoint");
    }
    fs::create_dir_all(checkpoint.parent().expect("checkpoint has a parent"))?;
    let mut header = serde_json::to_vec(&CheckpointHeader {
        input_digest: input_digest.to_string(),
    })?;
    header.push(b'\n');
    header.extend(jsonl_bytes(&done)?);
    miner_core::fsutil::write_atomic(&checkpoint, &header)?;

    let opts = ClassifyOptions {
        batch_size: cfg.batch_size,
        truncation: cfg.truncation,
        max_len: cfg.max_len,
        concurrency: cfg.concurrency,
        ..ClassifyOptions::default()
    };
    let chunk = cfg.batch_size * cfg.checkpoint_every;
    while done.len() < contexts.len() {
        let end = (done.len() + chunk).min(contexts.len());
        match classify(&contexts[done.len()..end], plugin.as_ref(), &opts) {
            Ok(preds) => {
                append(&checkpoint, &preds)?;
                done.extend(preds);
            }
            Err(e) => {
                append(&checkpoint, &e.completed)?;
                let saved = done.len() + e.completed.len();
                return Err(match PipelineError::from(e.source) {
                    PipelineError::External(m) => PipelineError::External(format!(
                        "{m}; {saved} of {} predictions checkpointed, re-run `miner predict` to resume",
                        contexts.len()
                    )),
                    other => other,
                });
            }
        }
    }

    let mut out = StageOutput {
        resumed,
        ..StageOutput::default()
    };
    let mut per_label = [0usize; NUM_LABELS];
    for p in &done {
        per_label[p.label.index()] += 1;
    }
    out.count("predictions", done.len());
    for l in miner_core::intent::IntentLabel::ALL {
        out.count(&l.name().to_ascii_lowercase(), per_label[l.index()]);
    }
    out.count("model_id", health.model_id.unwrap_or_default());
    runner.emit(&mut out, runner.path(paths::PREDICTIONS), &jsonl_bytes(&done)?)?;
    fs::remove_file(&checkpoint)?;
    Ok(out)
}
