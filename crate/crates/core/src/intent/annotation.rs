//! Gold labels: annotation tasks out, labelled records in.
//!
//! Two interchange shapes are understood:
//!
//! * native: a JSON array of
//!   `{"context_id", "text", "gold", "annotator", "timestamp"}` objects, with
//!   `gold` either a label name or its integer code;
//! * labeling-tool export: a JSON array of tasks
//!   `{"data": {"context_id", "text"}, "annotations": [{"completed_by",
//!   "created_at", "result": [{"value": {"choices": ["Release"]}}]}]}`.
//!   `data.context_id` maps to `context_id`, the first choice of each
//!   annotation to `gold`, `completed_by` (string, number, or an object with
//!   `email`) to `annotator`, and `created_at` to `timestamp`.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::label::IntentLabel;
use crate::context::ContextWindow;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub context_id: String,
    pub gold: IntentLabel,
    pub annotator: String,
    pub timestamp: DateTime<Utc>,
}

/// One context to be labelled, in the native interchange shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationItem {
    pub context_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repo_id: Option<String>,
    pub text: String,
    pub gold: Option<IntentLabel>,
    pub annotator: Option<String>,
    pub timestamp: Option<DateTime<Utc>>,
}

impl AnnotationItem {
    pub fn unlabelled(ctx: &ContextWindow) -> Self {
        Self {
            context_id: ctx.context_id.clone(),
            doc_id: Some(ctx.doc_id.clone()),
            repo_id: Some(ctx.repo_id.clone()),
            text: ctx.text.clone(),
            gold: None,
            annotator: None,
            timestamp: None,
        }
    }
}

/// Tasks in the labeling-tool import shape.
pub fn to_labeling_tool_tasks(items: &[AnnotationItem]) -> Value {
    Value::Array(
        items
            .iter()
            .map(|it| {
                let mut data = serde_json::Map::new();
                data.insert("context_id".into(), Value::String(it.context_id.clone()));
                data.insert("text".into(), Value::String(it.text.clone()));
                if let Some(d) = &it.doc_id {
                    data.insert("doc_id".into(), Value::String(d.clone()));
                }
                if let Some(r) = &it.repo_id {
                    data.insert("repo_id".into(), Value::String(r.clone()));
                }
                serde_json::json!({ "data": data })
            })
            .collect(),
    )
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ImportReport {
    pub records: Vec<AnnotationRecord>,
    /// Items left unlabelled.
    pub skipped: usize,
    /// Earlier labels by the same annotator for the same context that were
    /// replaced by a later one.
    pub superseded: usize,
}

fn annotator_of(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => n.to_string(),
        Value::Object(o) => o
            .get("email")
            .or_else(|| o.get("id"))
            .map(annotator_of)
            .unwrap_or_default(),
        _ => String::new(),
    }
}

fn parse_time(v: Option<&Value>) -> Result<DateTime<Utc>> {
    match v {
        Some(Value::String(s)) => DateTime::parse_from_rfc3339(s)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| Error::Invalid(format!("bad timestamp {s:?}: {e}"))),
        None | Some(Value::Null) => Ok(DateTime::<Utc>::UNIX_EPOCH),
        Some(other) => Err(Error::Invalid(format!("bad timestamp {other}"))),
    }
}

fn tool_records(task: &serde_json::Map<String, Value>, out: &mut Vec<AnnotationRecord>, skipped: &mut usize) -> Result<()> {
    let context_id = task
        .get("data")
        .and_then(|d| d.get("context_id"))
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Invalid("task without data.context_id".into()))?;
    let annotations = task.get("annotations").and_then(Value::as_array);
    let mut any = false;
    for ann in annotations.into_iter().flatten() {
        if ann.get("was_cancelled").and_then(Value::as_bool) == Some(true) {
            continue;
        }
        let choice = ann
            .get("result")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .find_map(|r| r.pointer("/value/choices/0").and_then(Value::as_str));
        let Some(choice) = choice else { continue };
        out.push(AnnotationRecord {
            context_id: context_id.to_string(),
            gold: choice.parse()?,
            annotator: ann.get("completed_by").map(annotator_of).unwrap_or_default(),
            timestamp: parse_time(ann.get("created_at"))?,
        });
        any = true;
    }
    if !any {
        *skipped += 1;
    }
    Ok(())
}

/// Parse labelled annotations in either interchange shape.
///
/// Keeps one label per (context, annotator): the latest by timestamp, later
/// entries winning ties.
pub fn import_annotations(json: &str) -> Result<ImportReport> {
    let items: Vec<Value> = serde_json::from_str(json)?;
    let mut raw = Vec::new();
    let mut skipped = 0;
    for item in items {
        let Value::Object(obj) = item else {
            return Err(Error::Invalid("annotation entries must be objects".into()));
        };
        if obj.contains_key("data") {
            tool_records(&obj, &mut raw, &mut skipped)?;
            continue;
        }
        let item: AnnotationItem = serde_json::from_value(Value::Object(obj))?;
        match item.gold {
            Some(gold) => raw.push(AnnotationRecord {
                context_id: item.context_id,
                gold,
                annotator: item.annotator.unwrap_or_default(),
                timestamp: item.timestamp.unwrap_or(DateTime::<Utc>::UNIX_EPOCH),
            }),
            None => skipped += 1,
        }
    }

    let total = raw.len();
    let mut latest: BTreeMap<(String, String), (usize, AnnotationRecord)> = BTreeMap::new();
    for (i, rec) in raw.into_iter().enumerate() {
        let key = (rec.context_id.clone(), rec.annotator.clone());
        match latest.get(&key) {
            Some((_, prev)) if prev.timestamp > rec.timestamp => {}
            _ => {
                latest.insert(key, (i, rec));
            }
        }
    }
    let mut kept: Vec<(usize, AnnotationRecord)> = latest.into_values().collect();
    kept.sort_by_key(|(i, _)| *i);
    let records: Vec<AnnotationRecord> = kept.into_iter().map(|(_, r)| r).collect();
    Ok(ImportReport {
        superseded: total - records.len(),
        records,
        skipped,
    })
}

/// Labelled records in the native shape, with their texts when known.
pub fn export_annotations(records: &[AnnotationRecord], texts: &BTreeMap<String, String>) -> Vec<AnnotationItem> {
    records
        .iter()
        .map(|r| AnnotationItem {
            context_id: r.context_id.clone(),
            doc_id: None,
            repo_id: None,
            text: texts.get(&r.context_id).cloned().unwrap_or_default(),
            gold: Some(r.gold),
            annotator: Some(r.annotator.clone()),
            timestamp: Some(r.timestamp),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_shape() {
        let json = r#"[
            {"context_id": "a", "text": "t", "gold": "Reuse", "annotator": "x", "timestamp": "2024-03-01T10:00:00Z"},
            {"context_id": "b", "text": "t", "gold": 3, "annotator": "x", "timestamp": "2024-03-01T10:00:00Z"},
            {"context_id": "c", "text": "t", "gold": null, "annotator": null, "timestamp": null}
        ]"#;
        let rep = import_annotations(json).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.records[1].gold, IntentLabel::Nothing);
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn labeling_tool_shape() {
        let json = r#"[
          {"id": 1, "data": {"context_id": "a", "text": "t"},
           "annotations": [
             {"completed_by": {"email": "ann@example.org"}, "created_at": "2024-03-01T10:00:00Z",
              "result": [{"type": "choices", "value": {"choices": ["Release"]}}]},
             {"completed_by": {"email": "ann@example.org"}, "created_at": "2024-03-02T10:00:00Z",
              "result": [{"type": "choices", "value": {"choices": ["Reference"]}}]},
             {"completed_by": 7, "created_at": "2024-03-01T10:00:00Z", "was_cancelled": true,
              "result": [{"value": {"choices": ["Reuse"]}}]}
           ]},
          {"id": 2, "data": {"context_id": "b", "text": "t"}, "annotations": []}
        ]"#;
        let rep = import_annotations(json).unwrap();
        assert_eq!(rep.records.len(), 1);
        assert_eq!(rep.records[0].gold, IntentLabel::Reference);
        assert_eq!(rep.records[0].annotator, "ann@example.org");
        assert_eq!(rep.superseded, 1);
        assert_eq!(rep.skipped, 1);
    }

    #[test]
    fn unknown_label_is_error() {
        let json = r#"[{"context_id": "a", "text": "t", "gold": "Maybe", "annotator": "x", "timestamp": null}]"#;
        assert!(import_annotations(json).is_err());
    }

    #[test]
    fn export_then_import() {
        let recs = vec![AnnotationRecord {
            context_id: "a".into(),
            gold: IntentLabel::Reuse,
            annotator: "x".into(),
            timestamp: DateTime::parse_from_rfc3339("2024-03-01T10:00:00Z").unwrap().with_timezone(&Utc),
        }];
        let items = export_annotations(&recs, &BTreeMap::new());
        let json = serde_json::to_string(&items).unwrap();
        assert_eq!(import_annotations(&json).unwrap().records, recs);
    }
}
