mod common;

use common::brute_auroc;
use hsad::evaluation::{acc, apply_labels, auroc, label_for, split};
use hsad::{LabelRule, ObservationPoint, TraceRecord};
use proptest::prelude::*;

/// Scores drawn from a small grid so ties are common, with both classes present.
fn scored_labels(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..max)
        .prop_flat_map(|n| {
            (
                prop::collection::vec((0u8..12).prop_map(|v| v as f64 / 4.0), n),
                prop::collection::vec(0u8..=1, n),
            )
        })
        .prop_filter("both classes", |(_, y)| y.contains(&0) && y.contains(&1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rank_auroc_matches_pair_count((scores, labels) in scored_labels(200)) {
        let fast = auroc(&scores, &labels).unwrap();
        prop_assert!((fast - brute_auroc(&scores, &labels)).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&fast));
    }
}

proptest! {
    #[test]
    fn auroc_is_invariant_under_monotone_maps((scores, labels) in scored_labels(100)) {
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
        prop_assert_eq!(auroc(&scores, &labels).unwrap(), auroc(&mapped, &labels).unwrap());
    }

    #[test]
    fn auroc_complements_on_flipped_labels((scores, labels) in scored_labels(100)) {
        let flipped: Vec<u8> = labels.iter().map(|y| 1 - y).collect();
        let sum = auroc(&scores, &labels).unwrap() + auroc(&scores, &flipped).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn accuracy_complements_on_flipped_predictions(
        pair in (1usize..100).prop_flat_map(|n| (prop::collection::vec(0u8..=1, n), prop::collection::vec(0u8..=1, n)))
    ) {
        let (pred, labels) = pair;
        let flipped: Vec<u8> = pred.iter().map(|y| 1 - y).collect();
        let sum = acc(&pred, &labels).unwrap() + acc(&flipped, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn positives_grow_with_tau(sims in prop::collection::vec(0.0..1.0f64, 1..100), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let count = |tau: f64| {
            let mut records: Vec<TraceRecord> = sims
                .iter()
                .map(|&s| TraceRecord { sim_score: Some(s), ..TraceRecord::new("r", ObservationPoint::AEnd, vec![0.0]) })
                .collect();
            apply_labels(&mut records, LabelRule { tau }).unwrap();
            records.iter().filter(|r| r.label == Some(1)).count()
        };
        prop_assert!(count(lo) <= count(hi));
        let (rule_lo, rule_hi) = (LabelRule { tau: lo }, LabelRule { tau: hi });
        for &s in &sims {
            prop_assert!(label_for(s, rule_lo) <= label_for(s, rule_hi));
        }
    }

    #[test]
    fn split_partitions_items(n in 2usize..500, frac in 0.05..0.95f64, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let test_size = (n as f64 * frac).round() as usize;
        prop_assume!(test_size > 0 && test_size < n);
        let (train, test) = split(&items, frac, seed).unwrap();
        prop_assert_eq!(test.len(), test_size);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, items.clone());
        prop_assert_eq!(split(&items, frac, seed).unwrap(), (train, test));
    }
}
