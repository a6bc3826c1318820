mod common;

use std::path::{Path, PathBuf};

use common::{miner, stderr, write_config, MockServer, Request};
use serde_json::{json, Value};

/// Resolves every id except `SYN0007`, which comes back without a year.
fn provider(req: &Request) -> (u16, String) {
    if req.header("authorization") != Some("Bearer s3cret") {
        return (401, json!({"error": "bad token"}).to_string());
    }
    let body: Value = serde_json::from_str(&req.body).unwrap();
    let records: Vec<Value> = body["ids"]
        .as_array()
        .unwrap()
        .iter()
        .map(|id| {
            let year = if id == "SYN0007" { Value::Null } else { json!(2011) };
            json!({
                "doc_id": id,
                "pub_year": year,
                "disciplines": [
                    {"code": "06", "name": "Biological Sciences", "weight": 3.0},
                    {"code": "08", "name": "Information and Computing Sciences", "weight": 1.0}
                ],
                "citation_count": 4
            })
        })
        .collect();
    (200, json!({"records": records}).to_string())
}

fn config(dir: &Path, url: &str) -> PathBuf {
    let extra = format!("[metadata]\nendpoint = \"{url}/records\"\nbatch_size = 20\nrate_per_second = 1000\n");
    write_config(dir, "mode = \"baseline\"", &extra)
}

fn ingest(cfg: &Path, run: &Path, token: Option<&str>, extra: &[&str]) -> std::process::Output {
    let mut args = vec!["ingest", "--config", cfg.to_str().unwrap(), "--run-dir", run.to_str().unwrap()];
    args.extend_from_slice(extra);
    match token {
        Some(t) => miner(&args, &[("MINER_META_TOKEN", t)]),
        None => miner(&args, &[]),
    }
}

fn documents(run: &Path) -> Vec<Value> {
    std::fs::read_to_string(run.join("ingest/documents.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn enrichment_is_batched_authenticated_and_cached() {
    let server = MockServer::start(provider);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &server.url);
    let run = tmp.path().join("run");

    let out = ingest(&cfg, &run, Some("s3cret"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(server.count("POST", "/records"), 3, "50 documents in batches of 20");
    let sizes: Vec<usize> = server
        .requests
        .lock()
        .unwrap()
        .iter()
        .map(|r| serde_json::from_str::<Value>(&r.body).unwrap()["ids"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, [20, 20, 10]);

    let docs = documents(&run);
    let enriched = docs.iter().find(|d| d["doc_id"] == "PMC7100041").unwrap();
    assert_eq!(enriched["pub_year"], 2011);
    let weights: Vec<f64> = enriched["disciplines"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["weight"].as_f64().unwrap())
        .collect();
    assert_eq!(weights, [0.75, 0.25]);
    let untouched = docs.iter().find(|d| d["doc_id"] == "SYN0007").unwrap();
    assert_ne!(untouched["disciplines"], enriched["disciplines"]);

    let diags = std::fs::read_to_string(run.join("ingest/diagnostics.jsonl")).unwrap();
    assert!(diags.lines().any(|l| l.contains("metadata_unresolved") && l.contains("SYN0007")));

    let before = server.requests.lock().unwrap().len();
    let out = ingest(&cfg, &run, Some("s3cret"), &["--force"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let requests = server.requests.lock().unwrap().clone();
    assert_eq!(requests.len() - before, 1, "only the unresolved document is fetched again");
    let body: Value = serde_json::from_str(&requests.last().unwrap().body).unwrap();
    assert_eq!(body["ids"], json!(["SYN0007"]));
    assert_eq!(documents(&run), docs);
}

#[test]
fn rejected_token_exits_2() {
    let server = MockServer::start(provider);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &server.url);
    let out = ingest(&cfg, &tmp.path().join("run"), Some("wrong"), &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert_eq!(server.count("POST", "/records"), 1);
}

#[test]
fn missing_token_exits_2() {
    let server = MockServer::start(provider);
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), &server.url);
    let out = ingest(&cfg, &tmp.path().join("run"), None, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MINER_META_TOKEN"));
    assert_eq!(server.count("POST", "/records"), 0);
}
