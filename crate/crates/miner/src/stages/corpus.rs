use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use miner_core::context::{extract_contexts, segment_sentences, ContextWindow};
use miner_core::corpus::metadata::{Enricher, HttpMetadataClient, MetadataCache, RateLimiter, TOKEN_ENV};
use miner_core::corpus::{load_jsonl, parse_jats_file, Document, LoadMode};
use miner_core::registry::{load_registry, CompiledRegistry, Mention};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{jsonl_bytes, paths, read_jsonl, InputDigest, Runner, StageOutput};
use crate::error::{PipelineError, Result};

/// A problem with one input item that did not stop the stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub kind: String,
    pub message: String,
}

/// An input file and its path relative to the configured root.
enum Input {
    Jsonl(PathBuf, String),
    Jats(PathBuf, String),
}

fn has_ext(p: &Path, exts: &[&str]) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

fn discover(roots: &[PathBuf]) -> Result<Vec<Input>> {
    let mut out = Vec::new();
    for root in roots {
        if root.is_file() {
            let name = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            if has_ext(root, &["xml", "nxml"]) {
                out.push(Input::Jats(root.clone(), name));
            } else {
                out.push(Input::Jsonl(root.clone(), name));
            }
            continue;
        }
        for entry in WalkDir::new(root).sort_by_file_name() {
            let entry = entry.map_err(|e| anyhow::anyhow!("cannot walk {}: {e}", root.display()))?;
            let p = entry.path();
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = p.strip_prefix(root).unwrap_or(p).to_string_lossy().replace('\\', "/");
            if has_ext(p, &["xml", "nxml"]) {
                out.push(Input::Jats(p.to_path_buf(), rel));
            } else if has_ext(p, &["jsonl"]) {
                out.push(Input::Jsonl(p.to_path_buf(), rel));
            }
        }
    }
    Ok(out)
}

pub(super) fn ingest_inputs(runner: &Runner, d: &mut InputDigest) -> Result<()> {
    let cfg = runner.config();
    d.value("lenient", &cfg.corpus.lenient)?;
    d.value("vocabulary", &cfg.corpus.vocabulary)?;
    d.value("metadata", &cfg.metadata)?;
    for input in discover(&cfg.corpus.paths)? {
        let (Input::Jsonl(p, _) | Input::Jats(p, _)) = &input;
        d.value("file", &p.to_string_lossy())?;
        d.file(p)?;
    }
    Ok(())
}

pub(super) fn ingest(runner: &Runner) -> Result<StageOutput> {
    let cfg = runner.config();
    let lenient = cfg.corpus.lenient;
    let inputs = discover(&cfg.corpus.paths)?;
    let mut diags = Vec::new();
    let mut docs: Vec<Document> = Vec::new();

    let jats: Vec<&PathBuf> = inputs
        .iter()
        .filter_map(|i| match i {
            Input::Jats(p, _) => Some(p),
            Input::Jsonl(..) => None,
        })
        .collect();
    let parsed: Vec<_> = runner.install(|| jats.par_iter().map(|p| (p, parse_jats_file(p))).collect());
    let mut parsed = parsed.into_iter();

    for input in &inputs {
        match input {
            Input::Jsonl(p, rel) => {
                let mode = if lenient { LoadMode::Lenient } else { LoadMode::Strict };
                let mut stream = load_jsonl(p, mode)?;
                for doc in stream.by_ref() {
                    docs.push(doc?);
                }
                for l in stream.into_diagnostics() {
                    diags.push(Diagnostic {
                        source: rel.clone(),
                        line: Some(l.line),
                        kind: "invalid_line".into(),
                        message: l.message,
                    });
                }
            }
            Input::Jats(_, rel) => {
                let (p, res) = parsed.next().expect("one result per JATS file");
                let source = rel.clone();
                match res {
                    Ok((mut doc, jd)) => {
                        doc.source_path = rel.clone();
                        if jd.replaced_sequences > 0 || jd.unresolved_entities > 0 {
                            diags.push(Diagnostic {
                                source: source.clone(),
                                line: None,
                                kind: "encoding".into(),
                                message: format!(
                                    "{} invalid byte sequences replaced, {} unresolved entities",
                                    jd.replaced_sequences, jd.unresolved_entities
                                ),
                            });
                        }
                        docs.push(doc);
                    }
                    Err(miner_core::Error::EmptyDocument) => diags.push(Diagnostic {
                        source,
                        line: None,
                        kind: "empty_document".into(),
                        message: "empty document".into(),
                    }),
                    Err(e) if lenient => diags.push(Diagnostic {
                        source,
                        line: None,
                        kind: "parse_error".into(),
                        message: e.to_string(),
                    }),
                    Err(e) => return Err(anyhow::anyhow!("{}: {e}", p.display()).into()),
                }
            }
        }
    }

    let mut seen = BTreeSet::new();
    let mut unique = Vec::with_capacity(docs.len());
    for d in docs {
        if seen.insert(d.doc_id.clone()) {
            unique.push(d);
        } else {
            diags.push(Diagnostic {
                source: d.source_path.clone(),
                line: None,
                kind: "duplicate_doc_id".into(),
                message: format!("{} already ingested; later copy dropped", d.doc_id),
            });
        }
    }
    let mut docs = unique;
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));

    let mut out = StageOutput::default();
    if let Some(meta) = &cfg.metadata {
        let token = match &meta.token {
            Some(t) => t.clone(),
            None => std::env::var(TOKEN_ENV).map_err(|_| {
                PipelineError::Config(format!("metadata enrichment needs metadata.token or {TOKEN_ENV}"))
            })?,
        };
        let client = HttpMetadataClient::new(&meta.endpoint, token, Duration::from_secs(meta.timeout_secs));
        let enricher = Enricher::new(client)
            .with_cache(MetadataCache::open(runner.path(paths::METADATA_CACHE))?)
            .with_batch_size(meta.batch_size)
            .with_rate_limit(RateLimiter::per_second(meta.rate_per_second));
        let ids: Vec<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
        let outcome = enricher.enrich(&ids)?;
        let by_id: BTreeMap<&str, _> = outcome.records.iter().map(|r| (r.doc_id.as_str(), r)).collect();
        for d in &mut docs {
            if let Some(r) = by_id.get(d.doc_id.as_str()) {
                r.apply_to(d);
            }
        }
        for u in &outcome.unresolved {
            diags.push(Diagnostic {
                source: u.doc_id.clone(),
                line: None,
                kind: "metadata_unresolved".into(),
                message: u.reason.clone(),
            });
        }
        out.count("enriched", outcome.records.len());
        out.count("unresolved", outcome.unresolved.len());
        out.count("metadata_cache_hits", outcome.cache_hits);
        out.count("metadata_network_calls", outcome.network_calls);
    }

    if !cfg.corpus.vocabulary.is_empty() {
        let vocab: BTreeSet<&str> = cfg.corpus.vocabulary.iter().map(String::as_str).collect();
        for d in &docs {
            for a in d.disciplines.iter().filter(|a| !vocab.contains(a.name.as_str())) {
                diags.push(Diagnostic {
                    source: d.doc_id.clone(),
                    line: None,
                    kind: "unknown_discipline".into(),
                    message: format!("{:?} is not in the configured vocabulary", a.name),
                });
            }
        }
    }

    out.count("files", inputs.len());
    out.count("documents", docs.len());
    out.count("diagnostics", diags.len());
    runner.emit(&mut out, runner.path(paths::DOCUMENTS), &jsonl_bytes(&docs)?)?;
    runner.emit(&mut out, runner.path(paths::INGEST_DIAGNOSTICS), &jsonl_bytes(&diags)?)?;
    Ok(out)
}

pub(super) fn match_mentions(runner: &Runner) -> Result<StageOutput> {
    let registry = CompiledRegistry::compile(load_registry(&runner.config().registry.path)?)?;
    let docs: Vec<Document> = read_jsonl(&runner.path(paths::DOCUMENTS))?;
    let per_doc: Vec<Vec<Mention>> = runner.install(|| docs.par_iter().map(|d| registry.find_mentions(d)).collect());
    let with_mentions = per_doc.iter().filter(|m| !m.is_empty()).count();
    let mentions: Vec<Mention> = per_doc.into_iter().flatten().collect();

    let mut out = StageOutput::default();
    out.count("documents", docs.len());
    out.count("documents_with_mentions", with_mentions);
    out.count("mentions", mentions.len());
    out.count("registry_patterns", registry.pattern_count());
    runner.emit(&mut out, runner.path(paths::MENTIONS), &jsonl_bytes(&mentions)?)?;
    Ok(out)
}

pub(super) fn contexts(runner: &Runner) -> Result<StageOutput> {
    let docs: Vec<Document> = read_jsonl(&runner.path(paths::DOCUMENTS))?;
    let mentions: Vec<Mention> = read_jsonl(&runner.path(paths::MENTIONS))?;
    let mut by_doc: BTreeMap<&str, Vec<Mention>> = BTreeMap::new();
    for m in mentions {
        by_doc.entry(docs_key(&docs, &m.doc_id)?).or_default().push(m);
    }
    let docs_by_id: BTreeMap<&str, &Document> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let work: Vec<(&Document, Vec<Mention>)> = by_doc.into_iter().map(|(id, ms)| (docs_by_id[id], ms)).collect();
    let per_doc: Vec<miner_core::Result<Vec<ContextWindow>>> = runner.install(|| {
        work.par_iter()
            .map(|(doc, ms)| extract_contexts(doc, ms, &segment_sentences(doc)))
            .collect()
    });
    let mut contexts = Vec::new();
    for r in per_doc {
        contexts.extend(r?);
    }

    let mut out = StageOutput::default();
    let articles = work.len();
    out.count("articles", articles);
    out.count("contexts", contexts.len());
    out.count(
        "contexts_per_article",
        if articles == 0 { 0.0 } else { contexts.len() as f64 / articles as f64 },
    );
    runner.emit(&mut out, runner.path(paths::CONTEXTS), &jsonl_bytes(&contexts)?)?;
    Ok(out)
}

fn docs_key<'a>(docs: &'a [Document], id: &str) -> Result<&'a str> {
    docs.binary_search_by(|d| d.doc_id.as_str().cmp(id))
        .map(|i| docs[i].doc_id.as_str())
        .map_err(|_| anyhow::anyhow!("mention refers to unknown document {id}").into())
}
