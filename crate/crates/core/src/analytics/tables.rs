use std::io::Write;

use super::{IntentDistribution, LabelDistribution, TemporalDistribution};
use crate::error::{Error, Result};
use crate::intent::IntentLabel;

fn num(x: f64) -> String {
    format!("{x:.6}")
}

fn label_columns(prefix: &str) -> impl Iterator<Item = String> + '_ {
    IntentLabel::ALL.iter().map(move |l| format!("{prefix}_{}", l.name().to_ascii_lowercase()))
}

fn flush<W: Write>(mut out: csv::Writer<W>) -> Result<()> {
    out.flush().map_err(|e| Error::io("<table>", e))
}

/// `rank,repo_id,display_name,mentions`
pub fn write_top_repos_csv<W: Write>(w: W, ranked: &[(String, usize)], display_name: impl Fn(&str) -> Option<String>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["rank", "repo_id", "display_name", "mentions"])?;
    for (i, (repo, count)) in ranked.iter().enumerate() {
        let name = display_name(repo).unwrap_or_default();
        out.write_record([(i + 1).to_string(), repo.clone(), name, count.to_string()])?;
    }
    flush(out)
}

/// `label,code,count,proportion`
pub fn write_label_csv<W: Write>(w: W, dist: &LabelDistribution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["label", "code", "count", "proportion"])?;
    for l in IntentLabel::ALL {
        out.write_record([
            l.name().to_string(),
            l.index().to_string(),
            dist.counts[l.index()].to_string(),
            num(dist.proportions[l.index()]),
        ])?;
    }
    flush(out)
}

fn distribution_header(key: &str) -> Vec<String> {
    let mut h = vec![key.to_string(), "contexts".to_string()];
    h.extend(label_columns("count"));
    h.extend(label_columns("share"));
    h
}

fn distribution_row(d: &IntentDistribution) -> Vec<String> {
    let mut r = vec![d.group_key.clone(), d.contexts.to_string()];
    r.extend(d.counts.iter().map(|&c| num(c)));
    r.extend(d.proportions.iter().map(|&p| num(p)));
    r
}

/// One row per group: key, contexts, four weighted counts, four shares.
pub fn write_distribution_csv<'a, W: Write>(w: W, key: &str, rows: impl IntoIterator<Item = &'a IntentDistribution>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(distribution_header(key))?;
    for d in rows {
        out.write_record(distribution_row(d))?;
    }
    flush(out)
}

/// Per-year rows with a trailing `low_support` flag.
pub fn write_temporal_csv<W: Write>(w: W, temporal: &TemporalDistribution) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = distribution_header("year");
    header.push("low_support".into());
    out.write_record(header)?;
    for y in &temporal.years {
        let mut row = distribution_row(&y.distribution);
        row.push(y.low_support.to_string());
        out.write_record(row)?;
    }
    flush(out)
}
