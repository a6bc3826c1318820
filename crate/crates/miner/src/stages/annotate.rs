use std::collections::{BTreeMap, BTreeSet};

use miner_core::context::ContextWindow;
use miner_core::intent::{import_annotations, to_labeling_tool_tasks, AnnotationItem, AnnotationRecord};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{jsonl_bytes, paths, pretty_json, read_json, read_jsonl, sub_seed, Runner, StageOutput};
use crate::error::{PipelineError, Result};

/// Draw `size` of the `population` sorted ids uniformly without replacement.
/// The result keeps the population's order.
pub fn sample_articles(population: &[String], size: usize, seed: u64) -> Result<Vec<String>> {
    if size > population.len() {
        return Err(PipelineError::Config(format!(
            "sample.size {size} exceeds the {} articles with mentions",
            population.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, population.len(), size).into_vec();
    picked.sort_unstable();
    Ok(picked.into_iter().map(|i| population[i].clone()).collect())
}

pub(super) fn sample(runner: &Runner) -> Result<StageOutput> {
    let cfg = runner.config();
    let contexts: Vec<ContextWindow> = read_jsonl(&runner.path(paths::CONTEXTS))?;
    let population: Vec<String> = contexts
        .iter()
        .map(|c| c.doc_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let chosen: BTreeSet<String> = sample_articles(&population, cfg.sample.size, sub_seed(cfg.seed, "sample"))?
        .into_iter()
        .collect();
    let tasks: Vec<AnnotationItem> = contexts
        .iter()
        .filter(|c| chosen.contains(&c.doc_id))
        .map(AnnotationItem::unlabelled)
        .collect();

    let mut out = StageOutput::default();
    out.count("population", population.len());
    out.count("articles", chosen.len());
    out.count("contexts", tasks.len());
    runner.emit(&mut out, runner.path(paths::TASKS), &pretty_json(&tasks)?)?;
    Ok(out)
}

pub(super) fn export_tasks(runner: &Runner) -> Result<StageOutput> {
    let tasks: Vec<AnnotationItem> = read_json(&runner.path(paths::TASKS))?;
    let mut out = StageOutput::default();
    out.count("tasks", tasks.len());
    runner.emit(&mut out, runner.path(paths::LABELING_TASKS), &pretty_json(&to_labeling_tool_tasks(&tasks))?)?;
    Ok(out)
}

pub(super) fn import(runner: &Runner) -> Result<StageOutput> {
    let path = runner
        .config()
        .annotations
        .path
        .clone()
        .ok_or_else(|| PipelineError::Config("annotate-import needs annotations.path".into()))?;
    let text = std::fs::read_to_string(&path).map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let report = import_annotations(&text)?;
    let contexts: Vec<ContextWindow> = read_jsonl(&runner.path(paths::CONTEXTS))?;
    let known: BTreeSet<&str> = contexts.iter().map(|c| c.context_id.as_str()).collect();
    let unknown: BTreeSet<&str> = report
        .records
        .iter()
        .map(|r| r.context_id.as_str())
        .filter(|id| !known.contains(id))
        .collect();
    if !unknown.is_empty() {
        let ids: Vec<&str> = unknown.into_iter().collect();
        return Err(anyhow::anyhow!(
            "{} annotated context ids are not in this run's contexts: {}",
            ids.len(),
            ids.join(", ")
        )
        .into());
    }
    let mut records = report.records;
    records.sort_by(|a, b| (&a.context_id, &a.annotator).cmp(&(&b.context_id, &b.annotator)));
    let annotators: BTreeSet<&str> = records.iter().map(|r| r.annotator.as_str()).collect();
    let labelled: BTreeSet<&str> = records.iter().map(|r| r.context_id.as_str()).collect();

    let mut out = StageOutput::default();
    out.count("records", records.len());
    out.count("contexts", labelled.len());
    out.count("annotators", annotators.len());
    out.count("skipped", report.skipped);
    out.count("superseded", report.superseded);
    runner.emit(&mut out, runner.path(paths::GOLD), &jsonl_bytes(&records)?)?;
    Ok(out)
}

/// One gold label per context: the majority over annotators, ties going to
/// the lowest label code. Annotator names are joined with `+` and the latest
/// timestamp kept.
pub fn adjudicate(records: &[AnnotationRecord]) -> Vec<AnnotationRecord> {
    let mut by_ctx: BTreeMap<&str, Vec<&AnnotationRecord>> = BTreeMap::new();
    for r in records {
        by_ctx.entry(r.context_id.as_str()).or_default().push(r);
    }
    by_ctx
        .into_iter()
        .map(|(id, rs)| {
            let mut votes = [0usize; miner_core::intent::NUM_LABELS];
            for r in &rs {
                votes[r.gold.index()] += 1;
            }
            let best = (0..votes.len()).fold(0, |b, i| if votes[i] > votes[b] { i } else { b });
            let mut names: Vec<&str> = rs.iter().map(|r| r.annotator.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            AnnotationRecord {
                context_id: id.to_string(),
                gold: miner_core::intent::IntentLabel::from_index(best).expect("label index"),
                annotator: names.join("+"),
                timestamp: rs.iter().map(|r| r.timestamp).max().expect("non-empty group"),
            }
        })
        .collect()
}
