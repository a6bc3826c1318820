use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::annotation::AnnotationRecord;
use super::classify::Prediction;
use super::label::{IntentLabel, NUM_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Mean of per-class scores weighted by gold support.
    #[default]
    Weighted,
    /// Unweighted mean over the labels that occur in gold or predictions.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: [ClassMetrics; NUM_LABELS],
    pub averaging: Averaging,
    /// `confusion[gold][predicted]`.
    pub confusion: [[usize; NUM_LABELS]; NUM_LABELS],
    pub total: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score aligned gold/predicted label pairs. Any ratio with a zero
/// denominator is 0.
pub fn evaluate_labels(pairs: &[(IntentLabel, IntentLabel)], averaging: Averaging) -> EvalReport {
    let mut confusion = [[0usize; NUM_LABELS]; NUM_LABELS];
    for &(gold, pred) in pairs {
        confusion[gold.index()][pred.index()] += 1;
    }
    let total = pairs.len();
    let correct: usize = (0..NUM_LABELS).map(|i| confusion[i][i]).sum();

    let mut per_class = [ClassMetrics::default(); NUM_LABELS];
    for (k, m) in per_class.iter_mut().enumerate() {
        let tp = confusion[k][k];
        let predicted: usize = (0..NUM_LABELS).map(|g| confusion[g][k]).sum();
        let support: usize = confusion[k].iter().sum();
        m.precision = ratio(tp, predicted);
        m.recall = ratio(tp, support);
        m.f1 = if m.precision + m.recall == 0.0 {
            0.0
        } else {
            2.0 * m.precision * m.recall / (m.precision + m.recall)
        };
        m.support = support;
    }

    let (precision, recall, f1) = match averaging {
        Averaging::Weighted => {
            let w = |f: fn(&ClassMetrics) -> f64| {
                if total == 0 {
                    0.0
                } else {
                    per_class.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
                }
            };
            (w(|m| m.precision), w(|m| m.recall), w(|m| m.f1))
        }
        Averaging::Macro => {
            let present: Vec<usize> = (0..NUM_LABELS)
                .filter(|&k| per_class[k].support > 0 || (0..NUM_LABELS).any(|g| confusion[g][k] > 0))
                .collect();
            let mean = |f: fn(&ClassMetrics) -> f64| {
                if present.is_empty() {
                    0.0
                } else {
                    present.iter().map(|&k| f(&per_class[k])).sum::<f64>() / present.len() as f64
                }
            };
            (mean(|m| m.precision), mean(|m| m.recall), mean(|m| m.f1))
        }
    };

    EvalReport {
        accuracy: ratio(correct, total),
        precision,
        recall,
        f1,
        per_class,
        averaging,
        confusion,
        total,
    }
}

/// Score predictions against gold annotations joined on `context_id`.
pub fn evaluate(preds: &[Prediction], golds: &[AnnotationRecord], averaging: Averaging) -> Result<EvalReport> {
    let by_id: HashMap<&str, IntentLabel> = preds.iter().map(|p| (p.context_id.as_str(), p.label)).collect();
    let mut missing = Vec::new();
    let mut pairs = Vec::with_capacity(golds.len());
    for g in golds {
        match by_id.get(g.context_id.as_str()) {
            Some(&pred) => pairs.push((g.gold, pred)),
            None => missing.push(g.context_id.clone()),
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingPredictions(missing));
    }
    Ok(evaluate_labels(&pairs, averaging))
}

#[cfg(test)]
mod tests {
    use super::*;
    use IntentLabel::*;

    #[test]
    fn perfect_predictions() {
        let pairs: Vec<_> = IntentLabel::ALL.iter().map(|&l| (l, l)).collect();
        let r = evaluate_labels(&pairs, Averaging::Weighted);
        assert_eq!((r.accuracy, r.precision, r.recall, r.f1), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn two_class_toy() {
        let pairs = [(Release, Release), (Release, Reuse), (Reuse, Reuse), (Reuse, Reuse)];
        let r = evaluate_labels(&pairs, Averaging::Weighted);
        assert!((r.accuracy - 0.75).abs() < 1e-12);
        assert!((r.per_class[0].precision - 1.0).abs() < 1e-12);
        assert!((r.per_class[0].recall - 0.5).abs() < 1e-12);
        assert!((r.per_class[1].precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[1].recall - 1.0).abs() < 1e-12);
        assert!((r.f1 - (0.5 * (2.0 / 3.0) + 0.5 * 0.8)).abs() < 1e-12);
        assert!((r.recall - r.accuracy).abs() < 1e-12);
        let m = evaluate_labels(&pairs, Averaging::Macro);
        assert!((m.f1 - (2.0 / 3.0 + 0.8) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn missing_prediction_is_listed() {
        use chrono::{TimeZone, Utc};
        let golds = vec![AnnotationRecord {
            context_id: "x".into(),
            gold: Release,
            annotator: "a".into(),
            timestamp: Utc.timestamp_opt(0, 0).unwrap(),
        }];
        match evaluate(&[], &golds, Averaging::Weighted) {
            Err(Error::MissingPredictions(ids)) => assert_eq!(ids, vec!["x"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_input_is_all_zero() {
        let r = evaluate_labels(&[], Averaging::Weighted);
        assert_eq!(r.total, 0);
        assert_eq!(r.f1, 0.0);
    }
}
