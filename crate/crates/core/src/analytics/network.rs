use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::group_by_document;
use crate::context::ContextWindow;
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::intent::{IntentLabel, Prediction};

/// How a document's weight is spread over its discipline pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairWeight {
    /// `1 / C(k, 2)` per pair: each document adds 1 in total.
    #[default]
    InverseBinomial,
    /// `1 / (k - 1)` per pair: each discipline's incident weight is 1.
    InverseDegree,
}

impl PairWeight {
    fn weight(self, k: usize) -> f64 {
        match self {
            PairWeight::InverseBinomial => 2.0 / (k * (k - 1)) as f64,
            PairWeight::InverseDegree => 1.0 / (k - 1) as f64,
        }
    }
}

/// How often a document counts toward an intent network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Qualification {
    #[default]
    OncePerDocument,
    OncePerContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NetworkOptions {
    pub pair_weight: PairWeight,
    pub qualification: Qualification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocNode {
    pub discipline: String,
    /// Sum of incident edge weights.
    pub strength: f64,
}

/// Undirected edge with `source < target`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocEdge {
    pub source: String,
    pub target: String,
    pub weight: f64,
}

/// Disciplines co-occurring on documents with a given intent. Nodes and edges
/// are sorted by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoocNetwork {
    pub intent: IntentLabel,
    pub nodes: Vec<CoocNode>,
    pub edges: Vec<CoocEdge>,
}

impl CoocNetwork {
    /// Build from a node set and edge weights, deriving node strengths.
    pub fn from_parts(intent: IntentLabel, nodes: BTreeSet<String>, edges: BTreeMap<(String, String), f64>) -> Self {
        let mut strength: BTreeMap<String, f64> = nodes.into_iter().map(|n| (n, 0.0)).collect();
        for ((a, b), w) in &edges {
            *strength.entry(a.clone()).or_default() += w;
            *strength.entry(b.clone()).or_default() += w;
        }
        Self {
            intent,
            nodes: strength
                .into_iter()
                .map(|(discipline, strength)| CoocNode { discipline, strength })
                .collect(),
            edges: edges
                .into_iter()
                .map(|((source, target), weight)| CoocEdge { source, target, weight })
                .collect(),
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }
}

/// Discipline co-occurrence network for one substantive intent.
pub fn cooccurrence_network(
    preds: &[Prediction],
    contexts: &[ContextWindow],
    documents: &[Document],
    intent: IntentLabel,
    options: NetworkOptions,
) -> Result<CoocNetwork> {
    if !intent.is_substantive() {
        return Err(Error::Invalid(format!("no co-occurrence network for {intent}")));
    }
    let mut nodes = BTreeSet::new();
    let mut edges: BTreeMap<(String, String), f64> = BTreeMap::new();
    for (doc, classified) in group_by_document(preds, contexts, documents)? {
        let hits = classified.iter().filter(|c| c.label == intent).count();
        if hits == 0 || doc.disciplines.is_empty() {
            continue;
        }
        let times = match options.qualification {
            Qualification::OncePerDocument => 1,
            Qualification::OncePerContext => hits,
        };
        let names: BTreeSet<&str> = doc.disciplines.iter().map(|d| d.name.as_str()).collect();
        nodes.extend(names.iter().map(|n| n.to_string()));
        let k = names.len();
        if k < 2 {
            continue;
        }
        let w = options.pair_weight.weight(k) * times as f64;
        let names: Vec<&str> = names.into_iter().collect();
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                *edges.entry((a.to_string(), b.to_string())).or_default() += w;
            }
        }
    }
    Ok(CoocNetwork::from_parts(intent, nodes, edges))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkFormat {
    EdgeCsv,
    Pajek,
}

impl NetworkFormat {
    pub fn extension(self) -> &'static str {
        match self {
            NetworkFormat::EdgeCsv => "csv",
            NetworkFormat::Pajek => "net",
        }
    }
}

/// Serialize a network. Weights use the shortest representation that parses
/// back to the same value.
pub fn write_network<W: Write>(net: &CoocNetwork, format: NetworkFormat, mut w: W) -> Result<()> {
    match format {
        NetworkFormat::EdgeCsv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["source", "target", "weight"])?;
            for e in &net.edges {
                out.write_record([e.source.as_str(), e.target.as_str(), &e.weight.to_string()])?;
            }
            out.flush().map_err(|e| Error::io("<network>", e))?;
        }
        NetworkFormat::Pajek => {
            let index: BTreeMap<&str, usize> =
                net.nodes.iter().enumerate().map(|(i, n)| (n.discipline.as_str(), i + 1)).collect();
            let mut s = format!("*Vertices {}\n", net.nodes.len());
            for (i, n) in net.nodes.iter().enumerate() {
                s.push_str(&format!("{} \"{}\"\n", i + 1, n.discipline.replace('"', "'")));
            }
            s.push_str("*Edges\n");
            for e in &net.edges {
                let (a, b) = match (index.get(e.source.as_str()), index.get(e.target.as_str())) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(Error::Invalid(format!("edge {}-{} has no vertex", e.source, e.target))),
                };
                s.push_str(&format!("{a} {b} {}\n", e.weight));
            }
            w.write_all(s.as_bytes()).map_err(|e| Error::io("<network>", e))?;
        }
    }
    Ok(())
}

/// Network file contents as a byte vector.
pub fn export_network(net: &CoocNetwork, format: NetworkFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_network(net, format, &mut buf)?;
    Ok(buf)
}

fn parse_weight(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Invalid(format!("bad edge weight {s:?}")))
}

fn ordered(a: String, b: String) -> (String, String) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Read an edge list back. Nodes are those appearing on an edge.
pub fn parse_edge_csv(text: &str, intent: IntentLabel) -> Result<CoocNetwork> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut nodes = BTreeSet::new();
    let mut edges = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Invalid(format!("edge row with {} fields", rec.len())));
        }
        nodes.insert(rec[0].to_string());
        nodes.insert(rec[1].to_string());
        edges.insert(ordered(rec[0].to_string(), rec[1].to_string()), parse_weight(&rec[2])?);
    }
    Ok(CoocNetwork::from_parts(intent, nodes, edges))
}

/// Read a Pajek file back, isolated vertices included.
pub fn parse_pajek(text: &str, intent: IntentLabel) -> Result<CoocNetwork> {
    let mut labels: BTreeMap<usize, String> = BTreeMap::new();
    let mut edges = BTreeMap::new();
    let mut in_edges = false;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("*vertices") {
            in_edges = false;
            continue;
        }
        if lower.starts_with("*edges") {
            in_edges = true;
            continue;
        }
        let bad = || Error::Invalid(format!("bad pajek line {line:?}"));
        if in_edges {
            let mut parts = line.split_whitespace();
            let mut vertex = || -> Result<String> {
                let i: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
                labels.get(&i).cloned().ok_or_else(bad)
            };
            let (a, b) = (vertex()?, vertex()?);
            let w = parse_weight(parts.next().unwrap_or("1"))?;
            edges.insert(ordered(a, b), w);
        } else {
            let (num, rest) = line.split_once(char::is_whitespace).ok_or_else(bad)?;
            let i: usize = num.parse().map_err(|_| bad())?;
            let label = rest.trim().trim_matches('"').to_string();
            labels.insert(i, label);
        }
    }
    Ok(CoocNetwork::from_parts(intent, labels.into_values().collect(), edges))
}
