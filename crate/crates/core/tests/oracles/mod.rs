//! Slow, direct re-statements of the library rules plus random input
//! generators, shared by the property tests and the acceptance target.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use miner_core::context::ContextWindow;
use miner_core::corpus::{DisciplineAssignment, Document};
use miner_core::intent::{IntentLabel, Prediction, TruncationMethod, NUM_LABELS};
use miner_core::registry::{RepositoryEntry, RepositoryKind};
use rand::seq::IndexedRandom;
use rand::Rng;

pub const LABELS: [IntentLabel; NUM_LABELS] = [
    IntentLabel::Release,
    IntentLabel::Reuse,
    IntentLabel::Reference,
    IntentLabel::Nothing,
];

// ---------------------------------------------------------------- URLs

const URL_PUNCT: &str = "._~:/?#[]@!$&'()*+,;=%-";

fn url_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || URL_PUNCT.contains(c)
}

fn strip_prefixes(mut s: &str) -> &str {
    while let Some(rest) = ["http://", "https://", "ftp://", "www."]
        .iter()
        .find_map(|p| s.strip_prefix(p))
    {
        s = rest;
    }
    s
}

pub fn normalize(url: &str) -> String {
    let lower = url.trim().to_lowercase();
    strip_prefixes(&lower).trim_end_matches('/').to_string()
}

/// URL tokens as byte spans: runs of URL characters, trailing prose
/// punctuation and leading non-alphanumerics removed, and a glued-on prefix
/// such as `at:` dropped in front of a scheme.
pub fn tokens(text: &str) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (i, c) in text.char_indices() {
        match (url_char(c), open) {
            (true, None) => open = Some(i),
            (false, Some(s)) => {
                runs.push((s, i));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, text.len()));
    }
    let mut out = Vec::new();
    for (s, e) in runs {
        let mut tok = &text[s..e];
        tok = tok.trim_end_matches(['.', ',', ';', ')', ']', '\'', '"']);
        let lead = tok.len() - tok.trim_start_matches(|c: char| !c.is_ascii_alphanumeric()).len();
        let mut start = s + lead;
        let end = s + tok.len();
        if start >= end {
            continue;
        }
        if let Some(p) = text[start..end].find("://") {
            let letters = text[start..start + p]
                .chars()
                .rev()
                .take_while(|c| c.is_ascii_alphabetic())
                .count();
            start += p - letters;
        }
        out.push((start, end));
    }
    out
}

/// `(start, end, repo_id, normalized)` for every token whose normalized form
/// starts with a pattern ending on a boundary, longest pattern per token,
/// found by testing every pattern at every byte offset.
pub fn mentions(text: &str, registry: &[RepositoryEntry]) -> BTreeSet<(usize, usize, String, String)> {
    let lower = text.to_ascii_lowercase();
    let toks = tokens(text);
    let mut best: BTreeMap<usize, (usize, String)> = BTreeMap::new();
    for i in 0..lower.len() {
        for entry in registry {
            for p in &entry.patterns {
                if !lower.as_bytes()[i..].starts_with(p.as_bytes()) {
                    continue;
                }
                let Some(t) = toks.iter().position(|&(s, e)| s <= i && i < e) else {
                    continue;
                };
                let (s, e) = toks[t];
                let norm = normalize(&text[s..e]);
                let ns = e - strip_prefixes(&lower[s..e]).len();
                if i != ns || p.len() > norm.len() {
                    continue;
                }
                let boundary = p.len() == norm.len()
                    || !p.ends_with(|c: char| c.is_ascii_alphanumeric())
                    || "/?#:".contains(norm.as_bytes()[p.len()] as char);
                if boundary && best.get(&t).is_none_or(|(len, _)| p.len() > *len) {
                    best.insert(t, (p.len(), entry.repo_id.clone()));
                }
            }
        }
    }
    best.into_iter()
        .map(|(t, (_, repo))| {
            let (s, e) = toks[t];
            (s, e, repo, normalize(&text[s..e]))
        })
        .collect()
}

/// Twenty-five repositories with nested and look-alike prefixes.
pub fn registry() -> Vec<RepositoryEntry> {
    let rows: [(&str, &[&str]); 25] = [
        ("zenodo", &["zenodo.org", "doi.org/10.5281/zenodo"]),
        ("figshare", &["figshare.com", "doi.org/10.6084/m9.figshare"]),
        ("dryad", &["datadryad.org", "doi.org/10.5061/dryad"]),
        ("ebi", &["ebi.ac.uk"]),
        ("arrayexpress", &["ebi.ac.uk/arrayexpress"]),
        ("ena", &["ebi.ac.uk/ena"]),
        ("gwas", &["ebi.ac.uk/gwas"]),
        ("geo", &["ncbi.nlm.nih.gov/geo"]),
        ("sra", &["ncbi.nlm.nih.gov/sra"]),
        ("pubmed", &["ncbi.nlm.nih.gov/pubmed", "pubmed.ncbi.nlm.nih.gov"]),
        ("pangaea", &["pangaea.de", "doi.pangaea.de"]),
        ("uniprot", &["uniprot.org"]),
        ("pdb", &["rcsb.org", "rcsb.org/pdb"]),
        ("osf", &["osf.io"]),
        ("dataverse", &["dataverse.harvard.edu"]),
        ("openneuro", &["openneuro.org"]),
        ("ccdc", &["ccdc.cam.ac.uk"]),
        ("meertens", &["meertens.knaw.nl"]),
        ("datashare", &["datashare.ed.ac.uk"]),
        ("icpsr", &["icpsr.umich.edu"]),
        ("ega", &["ega-archive.org"]),
        ("mendeley", &["data.mendeley.com"]),
        ("kaggle", &["kaggle.com/datasets"]),
        ("github", &["github.com"]),
        ("ftp-ncbi", &["ftp.ncbi.nlm.nih.gov"]),
    ];
    rows.iter()
        .map(|(id, patterns)| {
            let kind = if *id == "pubmed" { RepositoryKind::Literature } else { RepositoryKind::Data };
            RepositoryEntry::new(*id, id.to_uppercase(), patterns.iter().copied(), kind)
        })
        .collect()
}

fn flip_case(rng: &mut impl Rng, s: &str) -> String {
    s.chars()
        .map(|c| if rng.random_bool(0.2) { c.to_ascii_uppercase() } else { c })
        .collect()
}

/// A URL-ish token near the registry: real hosts, look-alikes, odd schemes,
/// paths and glued punctuation.
pub fn random_url(rng: &mut impl Rng, registry: &[RepositoryEntry]) -> String {
    let entry = registry.choose(rng).unwrap();
    let mut host = entry.patterns.choose(rng).unwrap().clone();
    match rng.random_range(0..10) {
        0 => host.push_str(["x", "-mirror", "2", ".evil.com"].choose(rng).unwrap()),
        1 => host.truncate(host.len().saturating_sub(2).max(1)),
        2 => host = format!("{}.{host}", ["my", "ftp", "archive"].choose(rng).unwrap()),
        3 => host = ["example.org/data", "10.1000/xyz", "localhost:8080"].choose(rng).unwrap().to_string(),
        _ => {}
    }
    let scheme = ["", "", "http://", "https://", "https://www.", "www.", "ftp://", "http://www.www.", "HTTPS://"]
        .choose(rng)
        .unwrap();
    let tail = ["", "", "/", "//", "/record/5210928", "/stash/share/yRDf1Kmj9_hR", "?q=1&b=2", "#frag", ":8080/x", "/a/b/", "/geo/query"]
        .choose(rng)
        .unwrap();
    let url = flip_case(rng, &format!("{scheme}{host}{tail}"));
    match rng.random_range(0..8) {
        0 => format!("({url})"),
        1 => format!("{url}."),
        2 => format!("at:{url}"),
        3 => format!("{url}),"),
        4 => format!("[{url}];"),
        _ => url,
    }
}

const WORDS: &[&str] = &[
    "data", "were", "deposited", "in", "the", "repository", "and", "reused", "from", "see", "Fig.", "et",
    "al.", "i.e.", "samples", "über", "naïve", "–", "results", "archive", "10.5281", "e.g.", "J.", "(n=3)",
];

/// A random body mixing prose and URL tokens.
pub fn random_body(rng: &mut impl Rng, registry: &[RepositoryEntry]) -> String {
    let n = rng.random_range(0..60);
    let mut words: Vec<String> = Vec::with_capacity(n);
    for _ in 0..n {
        if rng.random_bool(0.15) {
            words.push(random_url(rng, registry));
        } else {
            words.push(WORDS.choose(rng).unwrap().to_string());
        }
        if rng.random_bool(0.05) {
            words.push("\n".into());
        }
    }
    words.join(" ")
}

/// A random string built from URL fragments, for normalization.
pub fn random_raw_url(rng: &mut impl Rng) -> String {
    let parts = [
        "http://", "HTTPS://", "ftp://", "www.", "WWW.", "Meertens.", "knaw.nl", "/", "//", "en", "collections",
        "?", "#", "x", " ", "É", "ß", "1", "-", "https:/",
    ];
    let n = rng.random_range(0..10);
    (0..n).map(|_| *parts.choose(rng).unwrap()).collect()
}

// ---------------------------------------------------------------- truncation

/// Indices kept by `method`, decided one index at a time.
pub fn kept_indices(n: usize, max_len: usize, method: TruncationMethod) -> Vec<usize> {
    (0..n)
        .filter(|&i| {
            if n <= max_len {
                return true;
            }
            let drop = n - max_len;
            match method {
                TruncationMethod::Head => i < max_len,
                TruncationMethod::Tail => i >= drop,
                TruncationMethod::Middle => i >= drop / 2 && i < n - (drop - drop / 2),
                TruncationMethod::Split => i < max_len / 2 || i >= n - (max_len - max_len / 2),
            }
        })
        .collect()
}

// ---------------------------------------------------------------- metrics

pub struct OracleMetrics {
    pub accuracy: f64,
    pub precision: [f64; NUM_LABELS],
    pub recall: [f64; NUM_LABELS],
    pub f1: [f64; NUM_LABELS],
    pub support: [usize; NUM_LABELS],
    pub weighted: (f64, f64, f64),
    pub macro_avg: (f64, f64, f64),
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Metrics from explicit counting over the pairs, one class at a time.
pub fn metrics(pairs: &[(IntentLabel, IntentLabel)]) -> OracleMetrics {
    let mut m = OracleMetrics {
        accuracy: ratio(pairs.iter().filter(|(g, p)| g == p).count(), pairs.len()),
        precision: [0.0; NUM_LABELS],
        recall: [0.0; NUM_LABELS],
        f1: [0.0; NUM_LABELS],
        support: [0; NUM_LABELS],
        weighted: (0.0, 0.0, 0.0),
        macro_avg: (0.0, 0.0, 0.0),
    };
    let mut present = 0;
    for (k, label) in LABELS.iter().enumerate() {
        let tp = pairs.iter().filter(|(g, p)| g == label && p == label).count();
        let predicted = pairs.iter().filter(|(_, p)| p == label).count();
        let actual = pairs.iter().filter(|(g, _)| g == label).count();
        m.precision[k] = ratio(tp, predicted);
        m.recall[k] = ratio(tp, actual);
        let sum = m.precision[k] + m.recall[k];
        m.f1[k] = if sum == 0.0 { 0.0 } else { 2.0 * m.precision[k] * m.recall[k] / sum };
        m.support[k] = actual;
        let w = ratio(actual, pairs.len());
        m.weighted.0 += w * m.precision[k];
        m.weighted.1 += w * m.recall[k];
        m.weighted.2 += w * m.f1[k];
        if predicted + actual > 0 {
            present += 1;
            m.macro_avg.0 += m.precision[k];
            m.macro_avg.1 += m.recall[k];
            m.macro_avg.2 += m.f1[k];
        }
    }
    if present > 0 {
        let p = present as f64;
        m.macro_avg = (m.macro_avg.0 / p, m.macro_avg.1 / p, m.macro_avg.2 / p);
    }
    m
}

pub fn random_label(rng: &mut impl Rng) -> IntentLabel {
    LABELS[rng.random_range(0..NUM_LABELS)]
}

// ---------------------------------------------------------------- analytics

pub const DISCIPLINES: [&str; 6] = ["Biology", "Chemistry", "Economics", "History", "Medicine", "Physics"];

pub struct Corpus {
    pub documents: Vec<Document>,
    pub contexts: Vec<ContextWindow>,
    pub predictions: Vec<Prediction>,
}

pub fn context(id: &str, doc: &str, repo: &str) -> ContextWindow {
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

/// Documents with zero to four weighted disciplines, optional years and zero
/// to five classified contexts each.
pub fn random_corpus(rng: &mut impl Rng, docs: usize) -> Corpus {
    let mut c = Corpus {
        documents: Vec::new(),
        contexts: Vec::new(),
        predictions: Vec::new(),
    };
    for d in 0..docs {
        let doc_id = format!("D{d:04}");
        let mut doc = Document::new(doc_id.clone(), "body");
        let k = rng.random_range(0..=4);
        let names: Vec<&str> = DISCIPLINES.choose_multiple(rng, k).copied().collect();
        let raw: Vec<f64> = names.iter().map(|_| rng.random_range(0.1..1.0)).collect();
        let total: f64 = raw.iter().sum();
        doc.disciplines = names
            .iter()
            .zip(&raw)
            .map(|(n, w)| DisciplineAssignment::new("", *n, w / total))
            .collect();
        doc.pub_year = rng.random_bool(0.8).then(|| rng.random_range(2005..2024));
        for j in 0..rng.random_range(0..=5) {
            let id = format!("{doc_id}-{j}");
            let repo = ["zenodo", "figshare", "ebi"].choose(rng).unwrap();
            c.contexts.push(context(&id, &doc_id, repo));
            c.predictions.push(Prediction::certain(id, random_label(rng)));
        }
        c.documents.push(doc);
    }
    c
}

/// Edge weights of one intent's network, enumerating each qualifying
/// document's discipline pairs.
pub fn pair_weights(corpus: &Corpus, intent: IntentLabel) -> (BTreeSet<String>, BTreeMap<(String, String), f64>) {
    let mut nodes = BTreeSet::new();
    let mut edges: BTreeMap<(String, String), f64> = BTreeMap::new();
    for doc in &corpus.documents {
        let hit = corpus
            .contexts
            .iter()
            .zip(&corpus.predictions)
            .any(|(c, p)| c.doc_id == doc.doc_id && p.label == intent);
        if !hit {
            continue;
        }
        let mut names: Vec<String> = doc.disciplines.iter().map(|d| d.name.clone()).collect();
        names.sort();
        names.dedup();
        nodes.extend(names.iter().cloned());
        let k = names.len() as f64;
        let mut pairs = Vec::new();
        for a in &names {
            for b in &names {
                if a < b {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        for p in pairs {
            *edges.entry(p).or_default() += 2.0 / (k * (k - 1.0));
        }
    }
    (nodes, edges)
}
