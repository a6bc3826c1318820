//! Trusted-repository registry and mention detection.

mod url;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use aho_corasick::{AhoCorasick, AhoCorasickBuilder, MatchKind};
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub use url::{is_url_byte, normalize_url, pattern_matches, url_tokens, UrlTokens};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RepositoryKind {
    Data,
    Literature,
}

impl fmt::Display for RepositoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RepositoryKind::Data => "data",
            RepositoryKind::Literature => "literature",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepositoryEntry {
    pub repo_id: String,
    pub display_name: String,
    pub patterns: Vec<String>,
    pub kind: RepositoryKind,
}

impl RepositoryEntry {
    /// Build an entry, normalizing every pattern.
    pub fn new<I, S>(repo_id: impl Into<String>, display_name: impl Into<String>, patterns: I, kind: RepositoryKind) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self {
            repo_id: repo_id.into(),
            display_name: display_name.into(),
            patterns: patterns.into_iter().map(|p| normalize_url(p.as_ref())).collect(),
            kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repo_id.is_empty() {
            return Err(Error::Registry("empty repo_id".into()));
        }
        if self.patterns.is_empty() {
            return Err(Error::Registry(format!("{} has no patterns", self.repo_id)));
        }
        for p in &self.patterns {
            if p.is_empty() || normalize_url(p) != *p || !p.bytes().all(is_url_byte) {
                return Err(Error::Registry(format!(
                    "{}: pattern {p:?} is not a normalized URL prefix",
                    self.repo_id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Deserialize)]
struct RegistryRow {
    repo_id: String,
    display_name: String,
    pattern: String,
    kind: RepositoryKind,
}

/// Load a registry CSV (`repo_id,display_name,pattern,kind`, one row per
/// pattern) and group rows into entries in first-seen order.
pub fn load_registry(path: &Path) -> Result<Vec<RepositoryEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_registry(file)
}

pub fn read_registry<R: std::io::Read>(reader: R) -> Result<Vec<RepositoryEntry>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let missing: Vec<&str> = ["repo_id", "display_name", "pattern", "kind"]
        .into_iter()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Registry(format!("missing column(s): {}", missing.join(", "))));
    }

    let mut entries: Vec<RepositoryEntry> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut owner: HashMap<String, String> = HashMap::new();
    for row in rdr.deserialize() {
        let row: RegistryRow = row?;
        let pattern = normalize_url(&row.pattern);
        if pattern.is_empty() {
            return Err(Error::Registry(format!("{}: empty pattern", row.repo_id)));
        }
        match owner.get(&pattern) {
            Some(first) if *first != row.repo_id => {
                return Err(Error::AmbiguousPattern {
                    pattern,
                    first: first.clone(),
                    second: row.repo_id,
                })
            }
            Some(_) => {
                tracing::warn!(repo_id = %row.repo_id, %pattern, "duplicate pattern ignored");
                continue;
            }
            None => {}
        }
        owner.insert(pattern.clone(), row.repo_id.clone());
        let idx = *index.entry(row.repo_id.clone()).or_insert_with(|| {
            entries.push(RepositoryEntry {
                repo_id: row.repo_id.clone(),
                display_name: row.display_name.clone(),
                patterns: Vec::new(),
                kind: row.kind,
            });
            entries.len() - 1
        });
        entries[idx].patterns.push(pattern);
    }
    for e in &entries {
        e.validate()?;
    }
    Ok(entries)
}

/// One repository URL occurrence in a document.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub doc_id: String,
    pub repo_id: String,
    pub start: usize,
    pub end: usize,
    pub matched_text: String,
    pub normalized_url: String,
}

/// Registry entries plus a multi-pattern automaton over all their patterns.
#[derive(Debug, Clone)]
pub struct CompiledRegistry {
    entries: Vec<RepositoryEntry>,
    patterns: Vec<String>,
    owners: Vec<usize>,
    matcher: Option<AhoCorasick>,
}

impl CompiledRegistry {
    pub fn compile(entries: Vec<RepositoryEntry>) -> Result<Self> {
        let mut patterns = Vec::new();
        let mut owners = Vec::new();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            entry.validate()?;
            for p in &entry.patterns {
                if let Some(&j) = seen.get(p.as_str()) {
                    if j != i {
                        return Err(Error::AmbiguousPattern {
                            pattern: p.clone(),
                            first: entries[j].repo_id.clone(),
                            second: entry.repo_id.clone(),
                        });
                    }
                    continue;
                }
                seen.insert(p, i);
                patterns.push(p.clone());
                owners.push(i);
            }
        }
        let matcher = if patterns.is_empty() {
            None
        } else {
            Some(
                AhoCorasickBuilder::new()
                    .match_kind(MatchKind::Standard)
                    .build(&patterns)
                    .map_err(|e| Error::Registry(e.to_string()))?,
            )
        };
        Ok(Self {
            entries,
            patterns,
            owners,
            matcher,
        })
    }

    pub fn entries(&self) -> &[RepositoryEntry] {
        &self.entries
    }

    pub fn entry(&self, repo_id: &str) -> Option<&RepositoryEntry> {
        self.entries.iter().find(|e| e.repo_id == repo_id)
    }

    pub fn pattern_count(&self) -> usize {
        self.patterns.len()
    }

    /// Find every registry URL in the document.
    ///
    /// The automaton runs once over an ASCII-lowercased copy of the body, so
    /// byte offsets carry over unchanged to the original text. A hit counts
    /// only when it starts exactly where its URL token's normalized form
    /// starts and ends on a label or path boundary; per token the longest
    /// such pattern wins.
    pub fn find_mentions(&self, doc: &Document) -> Vec<Mention> {
        let Some(matcher) = &self.matcher else {
            return Vec::new();
        };
        let text = doc.body_text.as_str();
        let lower = text.as_bytes().to_ascii_lowercase();
        let tokens: Vec<(usize, usize)> = url_tokens(text).collect();
        if tokens.is_empty() {
            return Vec::new();
        }

        let mut normalized: Vec<Option<(usize, usize)>> = vec![None; tokens.len()];
        let mut best: Vec<Option<usize>> = vec![None; tokens.len()];
        for hit in matcher.find_overlapping_iter(&lower) {
            let pos = hit.start();
            let ti = match tokens.partition_point(|&(s, _)| s <= pos) {
                0 => continue,
                n => n - 1,
            };
            let (ts, te) = tokens[ti];
            if pos >= te {
                continue;
            }
            let (ns, ne) = *normalized[ti].get_or_insert_with(|| {
                let (s, e) = url::normalized_span(&lower[ts..te]);
                (ts + s, ts + e)
            });
            if pos != ns || hit.end() > ne {
                continue;
            }
            let pid = hit.pattern().as_usize();
            let pattern = self.patterns[pid].as_bytes();
            if !url::at_boundary(pattern, &lower[ns..ne], hit.end() - ns) {
                continue;
            }
            match best[ti] {
                Some(cur) if self.patterns[cur].len() >= pattern.len() => {}
                _ => best[ti] = Some(pid),
            }
        }

        tokens
            .iter()
            .zip(best)
            .filter_map(|(&(s, e), pid)| {
                let pid = pid?;
                let matched_text = &text[s..e];
                Some(Mention {
                    doc_id: doc.doc_id.clone(),
                    repo_id: self.entries[self.owners[pid]].repo_id.clone(),
                    start: s,
                    end: e,
                    matched_text: matched_text.to_string(),
                    normalized_url: normalize_url(matched_text),
                })
            })
            .collect()
    }
}

/// Compile entries into a matcher.
pub fn compile(entries: Vec<RepositoryEntry>) -> Result<CompiledRegistry> {
    CompiledRegistry::compile(entries)
}

/// Find every registry URL mention in `doc`.
pub fn find_mentions(doc: &Document, registry: &CompiledRegistry) -> Vec<Mention> {
    registry.find_mentions(doc)
}
