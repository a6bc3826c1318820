//! Aggregates over classified contexts: repository rankings, label shares,
//! per-repository, per-discipline and per-year intent distributions, and
//! per-intent discipline co-occurrence networks.
//!
//! Every aggregation visits its inputs in a canonical order (sorted by
//! document and context id), so results do not depend on input order, down to
//! the last bit of each floating-point sum.

mod network;
mod tables;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::context::ContextWindow;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::intent::{IntentLabel, Prediction, NUM_LABELS};
use crate::registry::Mention;

pub use network::{
    cooccurrence_network, export_network, parse_edge_csv, parse_pajek, write_network, CoocEdge, CoocNetwork, CoocNode,
    NetworkFormat, NetworkOptions, PairWeight, Qualification,
};
pub use tables::{write_distribution_csv, write_label_csv, write_temporal_csv, write_top_repos_csv};

/// Bucket for contexts whose document carries no discipline.
pub const UNCLASSIFIED: &str = "Unclassified";
pub const DEFAULT_MIN_SUPPORT: usize = 50;
pub const DEFAULT_TOP_REPOS: usize = 10;
pub const DEFAULT_TOP_REPO_INTENTS: usize = 20;

/// Label counts for one group and their shares over the included labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDistribution {
    pub group_key: String,
    pub counts: [f64; NUM_LABELS],
    pub proportions: [f64; NUM_LABELS],
    /// Contexts that contributed to this group.
    pub contexts: usize,
}

impl IntentDistribution {
    fn from_counts(group_key: String, counts: [f64; NUM_LABELS], contexts: usize) -> Option<Self> {
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Self {
            group_key,
            counts,
            proportions: counts.map(|c| c / total),
            contexts,
        })
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }
}

fn included(label: IntentLabel, include_nothing: bool) -> bool {
    include_nothing || label.is_substantive()
}

/// Mentions per repository, most frequent first, ties alphabetical.
pub fn top_repositories(mentions: &[Mention], n: usize) -> Result<Vec<(String, usize)>> {
    if n == 0 {
        return Err(Error::Invalid("top_repositories needs n >= 1".into()));
    }
    let mut tally: BTreeMap<&str, usize> = BTreeMap::new();
    for m in mentions {
        *tally.entry(m.repo_id.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(String, usize)> = tally.into_iter().map(|(r, c)| (r.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    Ok(ranked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    pub counts: [usize; NUM_LABELS],
    pub proportions: [f64; NUM_LABELS],
}

/// Share of each label over all predictions, Nothing included.
pub fn label_distribution(preds: &[Prediction]) -> Result<LabelDistribution> {
    if preds.is_empty() {
        return Err(Error::Invalid("label distribution of an empty prediction set".into()));
    }
    let mut counts = [0usize; NUM_LABELS];
    for p in preds {
        counts[p.label.index()] += 1;
    }
    let n = preds.len() as f64;
    Ok(LabelDistribution {
        counts,
        proportions: counts.map(|c| c as f64 / n),
    })
}

/// A prediction paired with its context.
#[derive(Debug, Clone, Copy)]
pub struct Classified<'a> {
    pub context: &'a ContextWindow,
    pub label: IntentLabel,
}

/// Pair every prediction with its context, sorted by (doc_id, context_id).
/// Contexts without a prediction are left out.
pub fn join_predictions<'a>(preds: &[Prediction], contexts: &'a [ContextWindow]) -> Result<Vec<Classified<'a>>> {
    let by_id: HashMap<&str, &ContextWindow> = contexts.iter().map(|c| (c.context_id.as_str(), c)).collect();
    let mut orphans = Vec::new();
    let mut out = Vec::with_capacity(preds.len());
    for p in preds {
        match by_id.get(p.context_id.as_str()) {
            Some(c) => out.push(Classified { context: c, label: p.label }),
            None => orphans.push(p.context_id.clone()),
        }
    }
    if !orphans.is_empty() {
        orphans.sort();
        orphans.dedup();
        return Err(Error::OrphanPredictions(orphans));
    }
    out.sort_by(|a, b| {
        (a.context.doc_id.as_str(), a.context.context_id.as_str()).cmp(&(b.context.doc_id.as_str(), b.context.context_id.as_str()))
    });
    Ok(out)
}

/// Classified contexts grouped by document, in doc_id order.
fn group_by_document<'a>(
    preds: &[Prediction],
    contexts: &'a [ContextWindow],
    documents: &'a [Document],
) -> Result<Vec<(&'a Document, Vec<Classified<'a>>)>> {
    let docs: HashMap<&str, &Document> = documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let mut grouped: Vec<(&Document, Vec<Classified>)> = Vec::new();
    for c in join_predictions(preds, contexts)? {
        let doc_id = c.context.doc_id.as_str();
        match grouped.last_mut() {
            Some((d, v)) if d.doc_id == doc_id => v.push(c),
            _ => {
                let d = docs.get(doc_id).ok_or_else(|| {
                    Error::Invalid(format!("context {} refers to unknown document {doc_id}", c.context.context_id))
                })?;
                grouped.push((d, vec![c]));
            }
        }
    }
    Ok(grouped)
}

/// Label shares for the `top_n` repositories with the most mentions, Nothing
/// included. Each context counts once; ranking sums `mention_count`, ties
/// alphabetical.
pub fn repo_intent_distribution(
    preds: &[Prediction],
    contexts: &[ContextWindow],
    top_n: usize,
) -> Result<Vec<IntentDistribution>> {
    let mut per_repo: BTreeMap<&str, ([f64; NUM_LABELS], usize, usize)> = BTreeMap::new();
    for c in join_predictions(preds, contexts)? {
        let e = per_repo.entry(c.context.repo_id.as_str()).or_default();
        e.0[c.label.index()] += 1.0;
        e.1 += c.context.mention_count;
        e.2 += 1;
    }
    let mut ranked: Vec<_> = per_repo.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .1.cmp(&a.1 .1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_n);
    Ok(ranked
        .into_iter()
        .filter_map(|(repo, (counts, _, n))| IntentDistribution::from_counts(repo.to_string(), counts, n))
        .collect())
}

/// What one unit of a discipline's weight stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DenominatorMode {
    /// Every context adds its document's discipline weight.
    #[default]
    Context,
    /// Every document adds its discipline weight once per label present
    /// among its contexts.
    Paper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisciplineOptions {
    pub include_nothing: bool,
    pub mode: DenominatorMode,
}

impl Default for DisciplineOptions {
    fn default() -> Self {
        Self {
            include_nothing: false,
            mode: DenominatorMode::Context,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisciplineDistribution {
    /// One row per discipline with non-zero included weight, by name.
    pub disciplines: Vec<IntentDistribution>,
    /// Contexts from documents without disciplines.
    pub unclassified: Option<IntentDistribution>,
    pub options: DisciplineOptions,
}

impl DisciplineDistribution {
    /// Total weight over all disciplines, excluding the unclassified bucket.
    pub fn assigned_weight(&self) -> f64 {
        self.disciplines.iter().map(IntentDistribution::total).sum()
    }
}

/// Fractionally counted label shares per discipline.
pub fn discipline_intent_distribution(
    preds: &[Prediction],
    contexts: &[ContextWindow],
    documents: &[Document],
    options: DisciplineOptions,
) -> Result<DisciplineDistribution> {
    let mut per: BTreeMap<&str, ([f64; NUM_LABELS], usize)> = BTreeMap::new();
    let mut unclassified = ([0.0; NUM_LABELS], 0usize);
    for (doc, classified) in group_by_document(preds, contexts, documents)? {
        let labels: Vec<IntentLabel> = classified
            .iter()
            .map(|c| c.label)
            .filter(|&l| included(l, options.include_nothing))
            .collect();
        if labels.is_empty() {
            continue;
        }
        let units: Vec<IntentLabel> = match options.mode {
            DenominatorMode::Context => labels.clone(),
            DenominatorMode::Paper => labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect(),
        };
        if doc.disciplines.is_empty() {
            for l in &units {
                unclassified.0[l.index()] += 1.0;
            }
            unclassified.1 += labels.len();
            continue;
        }
        for d in &doc.disciplines {
            let e = per.entry(d.name.as_str()).or_default();
            for l in &units {
                e.0[l.index()] += d.weight;
            }
            e.1 += labels.len();
        }
    }
    Ok(DisciplineDistribution {
        disciplines: per
            .into_iter()
            .filter_map(|(name, (counts, n))| IntentDistribution::from_counts(name.to_string(), counts, n))
            .collect(),
        unclassified: IntentDistribution::from_counts(UNCLASSIFIED.to_string(), unclassified.0, unclassified.1),
        options,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearDistribution {
    pub year: i32,
    pub distribution: IntentDistribution,
    pub low_support: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalDistribution {
    pub years: Vec<YearDistribution>,
    /// Contexts left out because their document has no publication year.
    pub missing_year: usize,
    pub min_support: usize,
}

/// Label shares per publication year over the substantive labels, or all
/// labels when `include_nothing` is set.
pub fn temporal_distribution(
    preds: &[Prediction],
    contexts: &[ContextWindow],
    documents: &[Document],
    include_nothing: bool,
    min_support: usize,
) -> Result<TemporalDistribution> {
    let mut per: BTreeMap<i32, ([f64; NUM_LABELS], usize)> = BTreeMap::new();
    let mut missing_year = 0;
    for (doc, classified) in group_by_document(preds, contexts, documents)? {
        let labels = classified.iter().map(|c| c.label).filter(|&l| included(l, include_nothing));
        match doc.pub_year {
            Some(year) => {
                let e = per.entry(year).or_default();
                for l in labels {
                    e.0[l.index()] += 1.0;
                    e.1 += 1;
                }
            }
            None => missing_year += labels.count(),
        }
    }
    Ok(TemporalDistribution {
        years: per
            .into_iter()
            .filter_map(|(year, (counts, n))| {
                IntentDistribution::from_counts(year.to_string(), counts, n).map(|distribution| YearDistribution {
                    year,
                    distribution,
                    low_support: n < min_support,
                })
            })
            .collect(),
        missing_year,
        min_support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DisciplineAssignment;
    use IntentLabel::*;

    pub(crate) fn ctx(id: &str, doc: &str, repo: &str) -> ContextWindow {
        ContextWindow {
            context_id: id.into(),
            doc_id: doc.into(),
            repo_id: repo.into(),
            core_index: 0,
            window_start: 0,
            window_end: 0,
            start: 0,
            end: 0,
            text: String::new(),
            mention_count: 1,
        }
    }

    pub(crate) fn doc(id: &str, disciplines: &[(&str, f64)], year: Option<i32>) -> Document {
        let mut d = Document::new(id, "x");
        d.disciplines = disciplines.iter().map(|(n, w)| DisciplineAssignment::new(*n, *n, *w)).collect();
        d.pub_year = year;
        d
    }

    fn mention(repo: &str) -> Mention {
        Mention {
            doc_id: "d".into(),
            repo_id: repo.into(),
            start: 0,
            end: 1,
            matched_text: String::new(),
            normalized_url: String::new(),
        }
    }

    #[test]
    fn top_repositories_counts_and_ties() {
        let ms: Vec<Mention> = ["a", "b", "a", "a"].iter().map(|r| mention(r)).collect();
        assert_eq!(top_repositories(&ms, 10).unwrap(), vec![("a".into(), 3), ("b".into(), 1)]);
        let ms: Vec<Mention> = ["b", "a", "b", "a"].iter().map(|r| mention(r)).collect();
        assert_eq!(top_repositories(&ms, 1).unwrap(), vec![("a".into(), 2)]);
        assert!(top_repositories(&ms, 0).is_err());
    }

    #[test]
    fn label_shares() {
        let preds: Vec<Prediction> = [Release, Release, Reuse, Reference]
            .iter()
            .enumerate()
            .map(|(i, &l)| Prediction::certain(i.to_string(), l))
            .collect();
        assert_eq!(label_distribution(&preds).unwrap().proportions, [0.5, 0.25, 0.25, 0.0]);
        assert!(label_distribution(&[]).is_err());
    }

    #[test]
    fn repo_shares_and_orphans() {
        let contexts = vec![ctx("1", "d", "r"), ctx("2", "d", "r"), ctx("3", "d", "r")];
        let preds = vec![
            Prediction::certain("1", Release),
            Prediction::certain("2", Release),
            Prediction::certain("3", Reuse),
        ];
        let dist = repo_intent_distribution(&preds, &contexts, 20).unwrap();
        assert_eq!(dist.len(), 1);
        assert!((dist[0].proportions[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((dist[0].proportions[1] - 1.0 / 3.0).abs() < 1e-12);

        let bad = vec![Prediction::certain("9", Release)];
        match repo_intent_distribution(&bad, &contexts, 20) {
            Err(Error::OrphanPredictions(ids)) => assert_eq!(ids, vec!["9"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn discipline_fractional_weights() {
        let docs = vec![doc("d", &[("A", 0.5), ("B", 0.5)], Some(2020))];
        let contexts = vec![ctx("1", "d", "r")];
        let preds = vec![Prediction::certain("1", Release)];
        let dist = discipline_intent_distribution(&preds, &contexts, &docs, DisciplineOptions::default()).unwrap();
        assert_eq!(dist.disciplines.len(), 2);
        for row in &dist.disciplines {
            assert_eq!(row.counts, [0.5, 0.0, 0.0, 0.0]);
        }
        assert!((dist.assigned_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discipline_shares_exclude_nothing_by_default() {
        let docs = vec![doc("d", &[("A", 1.0)], None)];
        let contexts = vec![ctx("1", "d", "r"), ctx("2", "d", "r"), ctx("3", "d", "r")];
        let preds = vec![
            Prediction::certain("1", Release),
            Prediction::certain("2", Reuse),
            Prediction::certain("3", Nothing),
        ];
        let dist = discipline_intent_distribution(&preds, &contexts, &docs, DisciplineOptions::default()).unwrap();
        assert_eq!(dist.disciplines[0].proportions, [0.5, 0.5, 0.0, 0.0]);
        let with = DisciplineOptions {
            include_nothing: true,
            ..Default::default()
        };
        let dist = discipline_intent_distribution(&preds, &contexts, &docs, with).unwrap();
        assert!((dist.disciplines[0].proportions[3] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn paper_mode_counts_each_label_once_per_document() {
        let docs = vec![doc("d", &[("A", 1.0)], None)];
        let contexts = vec![ctx("1", "d", "r"), ctx("2", "d", "r"), ctx("3", "d", "r")];
        let preds = vec![
            Prediction::certain("1", Release),
            Prediction::certain("2", Release),
            Prediction::certain("3", Reuse),
        ];
        let opts = DisciplineOptions {
            mode: DenominatorMode::Paper,
            ..Default::default()
        };
        let dist = discipline_intent_distribution(&preds, &contexts, &docs, opts).unwrap();
        assert_eq!(dist.disciplines[0].counts, [1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn unclassified_bucket() {
        let docs = vec![doc("d", &[], None)];
        let contexts = vec![ctx("1", "d", "r")];
        let preds = vec![Prediction::certain("1", Reuse)];
        let dist = discipline_intent_distribution(&preds, &contexts, &docs, DisciplineOptions::default()).unwrap();
        assert!(dist.disciplines.is_empty());
        let u = dist.unclassified.unwrap();
        assert_eq!(u.group_key, UNCLASSIFIED);
        assert_eq!(u.counts, [0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn temporal_shares_and_support() {
        let docs = vec![doc("d", &[("A", 1.0)], Some(2015)), doc("e", &[("A", 1.0)], None)];
        let contexts = vec![ctx("1", "d", "r"), ctx("2", "d", "r"), ctx("3", "d", "r"), ctx("4", "e", "r")];
        let preds = vec![
            Prediction::certain("1", Release),
            Prediction::certain("2", Release),
            Prediction::certain("3", Reuse),
            Prediction::certain("4", Reuse),
        ];
        let t = temporal_distribution(&preds, &contexts, &docs, false, 50).unwrap();
        assert_eq!(t.missing_year, 1);
        assert_eq!(t.years.len(), 1);
        let y = &t.years[0];
        assert_eq!(y.year, 2015);
        assert!(y.low_support);
        assert!((y.distribution.proportions[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((y.distribution.proportions[1] - 1.0 / 3.0).abs() < 1e-12);
    }
}
