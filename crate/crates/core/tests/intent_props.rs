mod oracles;

use miner_core::intent::{
    evaluate_labels, kept_ranges, split_items, truncate, Averaging, IntentLabel, SplitMode, SplitRatios,
    TruncationMethod, NUM_LABELS,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9
}

fn label() -> impl Strategy<Value = IntentLabel> {
    (0..NUM_LABELS).prop_map(|i| oracles::LABELS[i])
}

proptest! {
    #[test]
    fn truncation_keeps_oracle_indices(n in 0usize..3000, max_len in 1usize..700, m in 0usize..4) {
        let method = TruncationMethod::ALL[m];
        let tokens: Vec<usize> = (0..n).collect();
        let kept = truncate(&tokens, max_len, method);
        prop_assert_eq!(&kept, &oracles::kept_indices(n, max_len, method));
        prop_assert_eq!(kept.len(), n.min(max_len));
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        let ranges = kept_ranges(n, max_len, method);
        prop_assert_eq!(ranges.iter().map(|r| r.len()).sum::<usize>(), kept.len());
    }

    #[test]
    fn split_partitions_items(n in 4usize..400, seed in any::<u64>(), stratified in any::<bool>(), labels_seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(labels_seed);
        let items: Vec<(usize, IntentLabel)> = (0..n).map(|i| (i, oracles::random_label(&mut rng))).collect();
        let ratios = SplitRatios::default();
        let mode = if stratified { SplitMode::Stratified } else { SplitMode::Unstratified };
        let split = split_items(&items, |x| x.1, ratios, seed, mode).unwrap();
        prop_assert_eq!(split.sizes(), ratios.sizes(n));

        let mut all: Vec<usize> = split.train.iter().chain(&split.test).chain(&split.validation).map(|x| x.0).collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        if stratified {
            for label in oracles::LABELS {
                let total = items.iter().filter(|x| x.1 == label).count() as f64;
                for part in [&split.train, &split.test, &split.validation] {
                    let share = total * part.len() as f64 / n as f64;
                    let got = part.iter().filter(|x| x.1 == label).count() as f64;
                    prop_assert!((got - share).abs() <= 1.0 + 1e-9, "{label}: {got} vs {share}");
                }
            }
        }
        let again = split_items(&items, |x| x.1, ratios, seed, mode).unwrap();
        prop_assert_eq!(again, split);
    }

    #[test]
    fn evaluation_matches_confusion_oracle(pairs in prop::collection::vec((label(), label()), 1..200)) {
        let oracle = oracles::metrics(&pairs);
        let weighted = evaluate_labels(&pairs, Averaging::Weighted);
        let macro_avg = evaluate_labels(&pairs, Averaging::Macro);
        prop_assert!(close(weighted.accuracy, oracle.accuracy));
        prop_assert!(close(weighted.precision, oracle.weighted.0));
        prop_assert!(close(weighted.recall, oracle.weighted.1));
        prop_assert!(close(weighted.f1, oracle.weighted.2));
        prop_assert!(close(macro_avg.precision, oracle.macro_avg.0));
        prop_assert!(close(macro_avg.recall, oracle.macro_avg.1));
        prop_assert!(close(macro_avg.f1, oracle.macro_avg.2));
        for k in 0..NUM_LABELS {
            let c = &weighted.per_class[k];
            prop_assert!(close(c.precision, oracle.precision[k]));
            prop_assert!(close(c.recall, oracle.recall[k]));
            prop_assert!(close(c.f1, oracle.f1[k]));
            prop_assert_eq!(c.support, oracle.support[k]);
            for j in 0..NUM_LABELS {
                let n = pairs.iter().filter(|(g, p)| g.index() == k && p.index() == j).count();
                prop_assert_eq!(weighted.confusion[k][j], n);
            }
        }
        prop_assert_eq!(weighted.total, pairs.len());
    }
}

#[test]
fn middle_truncation_of_1000_drops_244_each_side() {
    assert_eq!(kept_ranges(1000, 512, TruncationMethod::Middle), vec![244..756]);
}
