use std::collections::BTreeMap;

use miner_core::analytics::{
    cooccurrence_network, discipline_intent_distribution, label_distribution, repo_intent_distribution,
    temporal_distribution, top_repositories, write_distribution_csv, write_label_csv, write_network,
    write_temporal_csv, write_top_repos_csv, CoocNetwork, DisciplineDistribution, IntentDistribution,
    LabelDistribution, NetworkFormat, TemporalDistribution,
};
use miner_core::context::ContextWindow;
use miner_core::corpus::Document;
use miner_core::intent::{
    evaluate as score, split_by_group, split_dataset, AnnotationItem, AnnotationRecord, EvalReport, IntentLabel,
    Prediction, SplitMode, SplitRatios, NUM_LABELS,
};
use miner_core::registry::{load_registry, Mention};
use serde::{Deserialize, Serialize};

use super::annotate::adjudicate;
use super::{jsonl_bytes, paths, pretty_json, read_json, read_jsonl, sub_seed, Runner, StageOutput};
use crate::config::{AnalyticsConfig, SplitStrategy};
use crate::error::{PipelineError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub test: usize,
    pub validation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_id: String,
    pub split: SplitStrategy,
    pub ratios: SplitRatios,
    pub seed: u64,
    pub sizes: SplitSizes,
    pub test: EvalReport,
    pub validation: EvalReport,
    pub all: EvalReport,
}

fn score_or_dependency(preds: &[Prediction], gold: &[AnnotationRecord], runner: &Runner) -> Result<EvalReport> {
    score(preds, gold, runner.config().evaluate.averaging).map_err(|e| match e {
        miner_core::Error::MissingPredictions(ids) => PipelineError::Dependency(format!(
            "{} annotated contexts have no prediction (first: {}); re-run `miner predict`",
            ids.len(),
            ids[0]
        )),
        other => other.into(),
    })
}

pub(super) fn evaluate(runner: &Runner) -> Result<StageOutput> {
    let cfg = runner.config();
    let gold = adjudicate(&read_jsonl::<AnnotationRecord>(&runner.path(paths::GOLD))?);
    let preds: Vec<Prediction> = read_jsonl(&runner.path(paths::PREDICTIONS))?;
    let contexts: Vec<ContextWindow> = read_jsonl(&runner.path(paths::CONTEXTS))?;
    let by_id: BTreeMap<&str, &ContextWindow> = contexts.iter().map(|c| (c.context_id.as_str(), c)).collect();

    let seed = sub_seed(cfg.seed, "evaluate");
    let ratios = cfg.evaluate.ratios;
    let split = match cfg.evaluate.split {
        SplitStrategy::Stratified => split_dataset(&gold, ratios, seed, SplitMode::Stratified)?,
        SplitStrategy::Unstratified => split_dataset(&gold, ratios, seed, SplitMode::Unstratified)?,
        SplitStrategy::Grouped => split_by_group(
            &gold,
            |r| by_id.get(r.context_id.as_str()).map(|c| c.doc_id.clone()).unwrap_or_default(),
            ratios,
            seed,
        )?,
    };

    let model_id = runner
        .manifest()
        .record("predict")
        .and_then(|r| r.counts.get("model_id"))
        .and_then(|v| v.as_str())
        .unwrap_or_default()
        .to_string();
    let report = EvaluationReport {
        model_id,
        split: cfg.evaluate.split,
        ratios,
        seed,
        sizes: SplitSizes {
            train: split.train.len(),
            test: split.test.len(),
            validation: split.validation.len(),
        },
        test: score_or_dependency(&preds, &split.test, runner)?,
        validation: score_or_dependency(&preds, &split.validation, runner)?,
        all: score_or_dependency(&preds, &gold, runner)?,
    };

    let items = |records: &[AnnotationRecord]| -> Vec<AnnotationItem> {
        records
            .iter()
            .map(|r| {
                let ctx = by_id.get(r.context_id.as_str());
                AnnotationItem {
                    context_id: r.context_id.clone(),
                    doc_id: ctx.map(|c| c.doc_id.clone()),
                    repo_id: ctx.map(|c| c.repo_id.clone()),
                    text: ctx.map(|c| c.text.clone()).unwrap_or_default(),
                    gold: Some(r.gold),
                    annotator: Some(r.annotator.clone()),
                    timestamp: Some(r.timestamp),
                }
            })
            .collect()
    };

    let mut out = StageOutput::default();
    out.count("gold_contexts", gold.len());
    out.count("test_accuracy", report.test.accuracy);
    out.count("test_f1", report.test.f1);
    runner.emit(&mut out, runner.path(paths::SPLIT_TRAIN), &jsonl_bytes(&items(&split.train))?)?;
    runner.emit(&mut out, runner.path(paths::SPLIT_TEST), &jsonl_bytes(&items(&split.test))?)?;
    runner.emit(&mut out, runner.path(paths::SPLIT_VALIDATION), &jsonl_bytes(&items(&split.validation))?)?;
    runner.emit(&mut out, runner.path(paths::REPORT), &pretty_json(&report)?)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoRank {
    pub repo_id: String,
    pub display_name: String,
    pub mentions: usize,
}

/// Everything the figure tables and network files are rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub options: AnalyticsConfig,
    pub documents: usize,
    pub contexts: usize,
    pub top_repositories: Vec<RepoRank>,
    pub labels: Option<LabelDistribution>,
    pub repo_intents: Vec<IntentDistribution>,
    pub disciplines: DisciplineDistribution,
    pub temporal: TemporalDistribution,
    pub networks: Vec<CoocNetwork>,
}

pub(super) fn analyze(runner: &Runner) -> Result<StageOutput> {
    let cfg = runner.config();
    let a = &cfg.analytics;
    let registry = load_registry(&cfg.registry.path)?;
    let names: BTreeMap<&str, &str> = registry.iter().map(|e| (e.repo_id.as_str(), e.display_name.as_str())).collect();
    let docs: Vec<Document> = read_jsonl(&runner.path(paths::DOCUMENTS))?;
    let mentions: Vec<Mention> = read_jsonl(&runner.path(paths::MENTIONS))?;
    let contexts: Vec<ContextWindow> = read_jsonl(&runner.path(paths::CONTEXTS))?;
    let preds: Vec<Prediction> = read_jsonl(&runner.path(paths::PREDICTIONS))?;

    let top_repositories = top_repositories(&mentions, a.top_repos)?
        .into_iter()
        .map(|(repo_id, mentions)| RepoRank {
            display_name: names.get(repo_id.as_str()).unwrap_or(&"").to_string(),
            repo_id,
            mentions,
        })
        .collect();
    let networks = IntentLabel::SUBSTANTIVE
        .iter()
        .map(|&l| cooccurrence_network(&preds, &contexts, &docs, l, a.network_options()))
        .collect::<miner_core::Result<Vec<_>>>()?;
    let analysis = Analysis {
        options: a.clone(),
        documents: docs.len(),
        contexts: contexts.len(),
        top_repositories,
        labels: if preds.is_empty() { None } else { Some(label_distribution(&preds)?) },
        repo_intents: repo_intent_distribution(&preds, &contexts, a.top_repo_intents)?,
        disciplines: discipline_intent_distribution(&preds, &contexts, &docs, a.discipline_options())?,
        temporal: temporal_distribution(&preds, &contexts, &docs, a.include_nothing, a.min_support)?,
        networks,
    };

    let mut out = StageOutput::default();
    out.count("disciplines", analysis.disciplines.disciplines.len());
    out.count("years", analysis.temporal.years.len());
    out.count("missing_year", analysis.temporal.missing_year);
    runner.emit(&mut out, runner.path(paths::ANALYSIS), &pretty_json(&analysis)?)?;
    Ok(out)
}

/// Provenance and side totals written next to the figure tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportMetadata {
    pub options: AnalyticsConfig,
    pub documents: usize,
    pub contexts: usize,
    pub unclassified: Option<IntentDistribution>,
    pub missing_year: usize,
    pub files: Vec<String>,
}

pub const FIG1: &str = "fig1_top_repos.csv";
pub const FIG2: &str = "fig2_labels.csv";
pub const FIG3: &str = "fig3_repo_intent.csv";
pub const FIG4: &str = "fig4_discipline_intent.csv";
pub const FIG5: &str = "fig5_temporal.csv";

pub fn network_file_stem(intent: IntentLabel) -> String {
    format!("network_{}", intent.name().to_ascii_lowercase())
}

pub(super) fn export(runner: &Runner) -> Result<StageOutput> {
    let analysis: Analysis = read_json(&runner.path(paths::ANALYSIS))?;
    let dir = runner.export_dir();
    let mut out = StageOutput::default();
    let mut files = Vec::new();
    let mut put = |name: String, bytes: Vec<u8>, out: &mut StageOutput| -> Result<()> {
        runner.emit(out, dir.join(&name), &bytes)?;
        files.push(name);
        Ok(())
    };

    let ranked: Vec<(String, usize)> = analysis
        .top_repositories
        .iter()
        .map(|r| (r.repo_id.clone(), r.mentions))
        .collect();
    let names: BTreeMap<&str, &str> = analysis
        .top_repositories
        .iter()
        .map(|r| (r.repo_id.as_str(), r.display_name.as_str()))
        .collect();
    let mut buf = Vec::new();
    write_top_repos_csv(&mut buf, &ranked, |id| names.get(id).map(|s| s.to_string()))?;
    put(FIG1.into(), buf, &mut out)?;

    let labels = analysis.labels.clone().unwrap_or(LabelDistribution {
        counts: [0; NUM_LABELS],
        proportions: [0.0; NUM_LABELS],
    });
    let mut buf = Vec::new();
    write_label_csv(&mut buf, &labels)?;
    put(FIG2.into(), buf, &mut out)?;

    let mut buf = Vec::new();
    write_distribution_csv(&mut buf, "repo_id", &analysis.repo_intents)?;
    put(FIG3.into(), buf, &mut out)?;

    let mut buf = Vec::new();
    write_distribution_csv(&mut buf, "discipline", &analysis.disciplines.disciplines)?;
    put(FIG4.into(), buf, &mut out)?;

    let mut buf = Vec::new();
    write_temporal_csv(&mut buf, &analysis.temporal)?;
    put(FIG5.into(), buf, &mut out)?;

    for net in &analysis.networks {
        for format in [NetworkFormat::Pajek, NetworkFormat::EdgeCsv] {
            let mut buf = Vec::new();
            write_network(net, format, &mut buf)?;
            put(format!("{}.{}", network_file_stem(net.intent), format.extension()), buf, &mut out)?;
        }
    }

    let meta = ExportMetadata {
        options: analysis.options.clone(),
        documents: analysis.documents,
        contexts: analysis.contexts,
        unclassified: analysis.disciplines.unclassified.clone(),
        missing_year: analysis.temporal.missing_year,
        files: files.clone(),
    };
    runner.emit(&mut out, dir.join("metadata.json"), &pretty_json(&meta)?)?;
    out.count("files", files.len() + 1);
    Ok(out)
}

