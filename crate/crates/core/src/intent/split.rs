//! Seeded train/test/validation partitioning of annotated contexts.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::annotation::AnnotationRecord;
use super::label::{IntentLabel, NUM_LABELS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub test: f64,
    pub validation: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.8,
            test: 0.1,
            validation: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.test, self.validation];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Split(format!("ratios {parts:?} must be non-negative and sum to 1")));
        }
        Ok(())
    }

    /// Subset sizes for `n` items: the training share is floored and the
    /// held-out remainder is divided between test and validation in
    /// proportion, test floored.
    pub fn sizes(&self, n: usize) -> [usize; 3] {
        const EPS: f64 = 1e-9;
        let train = ((n as f64 * self.train) + EPS).floor() as usize;
        let rest = n - train.min(n);
        let held_out = self.test + self.validation;
        let test = if held_out > 0.0 {
            ((rest as f64 * self.test / held_out) + EPS).floor() as usize
        } else {
            0
        };
        [train.min(n), test, rest - test]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Stratified,
    Unstratified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub validation: Vec<T>,
}

impl<T> DatasetSplit<T> {
    pub fn sizes(&self) -> [usize; 3] {
        [self.train.len(), self.test.len(), self.validation.len()]
    }

    fn from_parts([train, test, validation]: [Vec<T>; 3]) -> Self {
        Self { train, test, validation }
    }
}

/// Integer per-class allocation whose class totals and subset totals are
/// exact and whose cells are within one item of the proportional share.
///
/// Floors of the proportional shares leave at most two items per class and
/// a small deficit per subset; those are handed out one per cell, each
/// class serving the subsets with the largest remaining deficit.
fn allocate(class_counts: &[usize], sizes: [usize; 3]) -> Vec<[usize; 3]> {
    let n: usize = class_counts.iter().sum();
    let mut alloc: Vec<[usize; 3]> = Vec::with_capacity(class_counts.len());
    let mut fracs: Vec<[f64; 3]> = Vec::with_capacity(class_counts.len());
    for &c in class_counts {
        let mut row = [0usize; 3];
        let mut frac = [0f64; 3];
        for s in 0..3 {
            // exact integer floor of c * size / n
            row[s] = c * sizes[s] / n;
            frac[s] = (c * sizes[s] % n) as f64 / n as f64;
        }
        alloc.push(row);
        fracs.push(frac);
    }
    let mut deficit: [usize; 3] = std::array::from_fn(|s| sizes[s] - alloc.iter().map(|r| r[s]).sum::<usize>());
    let mut residual: Vec<(usize, usize)> = class_counts
        .iter()
        .enumerate()
        .map(|(k, &c)| (k, c - alloc[k].iter().sum::<usize>()))
        .collect();
    residual.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    for (k, r) in residual {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            deficit[b]
                .cmp(&deficit[a])
                .then(fracs[k][b].total_cmp(&fracs[k][a]))
                .then(a.cmp(&b))
        });
        for &s in order.iter().take(r) {
            debug_assert!(deficit[s] > 0, "controlled rounding failed");
            alloc[k][s] += 1;
            deficit[s] = deficit[s].saturating_sub(1);
        }
    }
    alloc
}

/// Partition items into train/test/validation subsets.
///
/// Deterministic for a given seed. In stratified mode every subset's count
/// of each label is within one item of its proportional share.
pub fn split_items<T: Clone>(
    items: &[T],
    label_of: impl Fn(&T) -> IntentLabel,
    ratios: SplitRatios,
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    if items.is_empty() {
        return Err(Error::Split("no records to split".into()));
    }
    let sizes = ratios.sizes(items.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: [Vec<T>; 3] = Default::default();

    match mode {
        SplitMode::Unstratified => {
            let mut shuffled = items.to_vec();
            shuffled.shuffle(&mut rng);
            let mut it = shuffled.into_iter();
            for (s, part) in parts.iter_mut().enumerate() {
                part.extend(it.by_ref().take(sizes[s]));
            }
        }
        SplitMode::Stratified => {
            if items.len() < NUM_LABELS {
                return Err(Error::Split(format!(
                    "{} records is fewer than the {NUM_LABELS} classes; use unstratified mode",
                    items.len()
                )));
            }
            let mut by_class: BTreeMap<IntentLabel, Vec<T>> = BTreeMap::new();
            for item in items {
                by_class.entry(label_of(item)).or_default().push(item.clone());
            }
            let counts: Vec<usize> = by_class.values().map(Vec::len).collect();
            let alloc = allocate(&counts, sizes);
            for (members, quota) in by_class.into_values().zip(alloc) {
                let mut members = members;
                members.shuffle(&mut rng);
                let mut it = members.into_iter();
                for (s, part) in parts.iter_mut().enumerate() {
                    part.extend(it.by_ref().take(quota[s]));
                }
            }
            for part in &mut parts {
                part.shuffle(&mut rng);
            }
        }
    }
    Ok(DatasetSplit::from_parts(parts))
}

/// Split annotation records, stratified by gold label by default.
pub fn split_dataset(
    records: &[AnnotationRecord],
    ratios: SplitRatios,
    seed: u64,
    mode: SplitMode,
) -> Result<DatasetSplit<AnnotationRecord>> {
    split_items(records, |r| r.gold, ratios, seed, mode)
}

/// Split keeping every group (for example all contexts of one article) in a
/// single subset. Groups are shuffled and each goes to the subset furthest
/// below its target size, so sizes are approximate.
pub fn split_by_group<T: Clone>(
    items: &[T],
    group_of: impl Fn(&T) -> String,
    ratios: SplitRatios,
    seed: u64,
) -> Result<DatasetSplit<T>> {
    ratios.validate()?;
    if items.is_empty() {
        return Err(Error::Split("no records to split".into()));
    }
    let mut groups: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for item in items {
        groups.entry(group_of(item)).or_default().push(item.clone());
    }
    let mut groups: Vec<Vec<T>> = groups.into_values().collect();
    groups.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let targets = ratios.sizes(items.len());
    let mut parts: [Vec<T>; 3] = Default::default();
    for group in groups {
        let s = (0..3)
            .max_by(|&a, &b| {
                let da = targets[a] as f64 - parts[a].len() as f64;
                let db = targets[b] as f64 - parts[b].len() as f64;
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("three subsets");
        parts[s].extend(group);
    }
    Ok(DatasetSplit::from_parts(parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn record(i: usize, gold: IntentLabel) -> AnnotationRecord {
        AnnotationRecord {
            context_id: format!("c{i}"),
            gold,
            annotator: "a".into(),
            timestamp: Utc.timestamp_opt(0, 0).unwrap(),
        }
    }

    fn paper_mix() -> Vec<AnnotationRecord> {
        let counts = [(IntentLabel::Release, 670), (IntentLabel::Reuse, 453), (IntentLabel::Reference, 119), (IntentLabel::Nothing, 86)];
        let mut out = Vec::new();
        for (label, c) in counts {
            for _ in 0..c {
                out.push(record(out.len(), label));
            }
        }
        out
    }

    #[test]
    fn sizes_for_1328() {
        assert_eq!(SplitRatios::default().sizes(1328), [1062, 133, 133]);
        let split = split_dataset(&paper_mix(), SplitRatios::default(), 7, SplitMode::Stratified).unwrap();
        assert_eq!(split.sizes(), [1062, 133, 133]);
    }

    #[test]
    fn ten_of_one_class() {
        let recs: Vec<_> = (0..10).map(|i| record(i, IntentLabel::Reuse)).collect();
        let split = split_dataset(&recs, SplitRatios::default(), 1, SplitMode::Stratified).unwrap();
        assert_eq!(split.sizes(), [8, 1, 1]);
    }

    #[test]
    fn same_seed_same_membership() {
        let a = split_dataset(&paper_mix(), SplitRatios::default(), 42, SplitMode::Stratified).unwrap();
        let b = split_dataset(&paper_mix(), SplitRatios::default(), 42, SplitMode::Stratified).unwrap();
        assert_eq!(a, b);
        let c = split_dataset(&paper_mix(), SplitRatios::default(), 43, SplitMode::Stratified).unwrap();
        assert_ne!(a.test, c.test);
    }

    #[test]
    fn too_few_records_for_stratification() {
        let recs: Vec<_> = (0..3).map(|i| record(i, IntentLabel::Reuse)).collect();
        let err = split_dataset(&recs, SplitRatios::default(), 1, SplitMode::Stratified).unwrap_err();
        assert!(err.to_string().contains("unstratified"));
        assert!(split_dataset(&recs, SplitRatios::default(), 1, SplitMode::Unstratified).is_ok());
    }

    #[test]
    fn grouped_split_keeps_groups_together() {
        let recs: Vec<_> = (0..100).map(|i| record(i, IntentLabel::ALL[i % 4])).collect();
        let split = split_by_group(&recs, |r| format!("doc{}", r.context_id[1..].parse::<usize>().unwrap() / 3), SplitRatios::default(), 5).unwrap();
        let group = |r: &AnnotationRecord| r.context_id[1..].parse::<usize>().unwrap() / 3;
        for (a, b) in [(&split.train, &split.test), (&split.train, &split.validation), (&split.test, &split.validation)] {
            assert!(a.iter().all(|x| b.iter().all(|y| group(x) != group(y))));
        }
        assert_eq!(split.sizes().iter().sum::<usize>(), 100);
    }

    #[test]
    fn rejects_bad_ratios() {
        let recs = paper_mix();
        let r = SplitRatios { train: 0.8, test: 0.1, validation: 0.2 };
        assert!(split_dataset(&recs, r, 1, SplitMode::Stratified).is_err());
    }
}
