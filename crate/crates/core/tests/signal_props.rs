use std::collections::HashMap;

use hsad::signal::{build_signal_matrix, resolve_random_layers};
use hsad::{LayerSelection, NodeTag, ObservationPoint, SelectionSpec, TraceHeader, TraceRecord};
use proptest::prelude::*;

fn header(layers: usize, dim: usize, nodes: Vec<NodeTag>) -> TraceHeader {
    TraceHeader {
        model_name: "m".into(),
        num_layers: layers,
        hidden_dim: dim,
        node_order: nodes,
        record_count: 1,
        dataset_name: "d".into(),
    }
}

/// Each value encodes its own (layer, slot, dim) so misplacements are visible.
fn tagged_record(h: &TraceHeader) -> TraceRecord {
    let mut values = Vec::with_capacity(h.values_per_record());
    for l in 0..h.num_layers {
        for s in 0..h.node_order.len() {
            for i in 0..h.hidden_dim {
                values.push((l * 10_000 + s * 1_000 + i) as f32);
            }
        }
    }
    TraceRecord::new("r", ObservationPoint::AEnd, values)
}

fn node_subset() -> impl Strategy<Value = Vec<NodeTag>> {
    prop::sample::subsequence(NodeTag::ALL.to_vec(), 1..=4)
}

fn geometry() -> impl Strategy<Value = (usize, usize, Vec<NodeTag>, Vec<usize>, Vec<NodeTag>)> {
    (1usize..10, 1usize..12, node_subset()).prop_flat_map(|(l, d, captured)| {
        (
            Just(l),
            Just(d),
            Just(captured.clone()),
            prop::sample::subsequence((1..=l).collect::<Vec<_>>(), 1..=l),
            prop::sample::subsequence(captured.clone(), 1..=captured.len()).prop_shuffle(),
        )
    })
}

proptest! {
    #[test]
    fn matrix_matches_direct_indexing((l, d, captured, layers, nodes) in geometry()) {
        let h = header(l, d, captured.clone());
        let record = tagged_record(&h);
        let select = SelectionSpec { layers: LayerSelection::Explicit(layers.clone()), nodes: nodes.clone() };
        let t = build_signal_matrix(&record, &h, &select).unwrap();

        let mut ordered = nodes.clone();
        ordered.sort_by_key(|n| n.rank());
        prop_assert_eq!(t.data.dim(), (layers.len() * ordered.len(), d));
        prop_assert_eq!(&t.layer_ids, &layers);
        prop_assert_eq!(&t.node_tags, &ordered);

        let all_values: Vec<f64> = record.values.iter().map(|&v| v as f64).collect();
        for (li, &layer) in layers.iter().enumerate() {
            for (j, tag) in ordered.iter().enumerate() {
                let slot = captured.iter().position(|c| c == tag).unwrap();
                for i in 0..d {
                    let raw = record.values[((layer - 1) * captured.len() + slot) * d + i] as f64;
                    let got = t.data[[li * ordered.len() + j, i]];
                    prop_assert_eq!(got, raw);
                    prop_assert!(all_values.contains(&got));
                }
            }
        }
    }

    #[test]
    fn column_slices_agree((l, d, captured, layers, nodes) in geometry()) {
        let h = header(l, d, captured);
        let record = tagged_record(&h);
        let select = SelectionSpec { layers: LayerSelection::Explicit(layers), nodes };
        let t = build_signal_matrix(&record, &h, &select).unwrap();
        for i in 0..d {
            let col = t.data.column(i);
            prop_assert_eq!(col.len(), t.signal_len());
            for (n, v) in col.iter().enumerate() {
                prop_assert_eq!(*v, t.data[[n, i]]);
            }
        }
    }

    #[test]
    fn random_layers_are_sorted_distinct(l in 1usize..64, k_frac in 0.0..1.0f64, seed in any::<u64>()) {
        let k = 1 + ((l - 1) as f64 * k_frac) as usize;
        let picked = resolve_random_layers(l, k, seed).unwrap();
        prop_assert_eq!(picked.len(), k);
        prop_assert!(picked.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(picked.iter().all(|&x| (1..=l).contains(&x)));
        prop_assert_eq!(picked, resolve_random_layers(l, k, seed).unwrap());
    }
}

#[test]
fn random_layer_pairs_are_uniform() {
    let seeds = 10_000;
    let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
    for seed in 0..seeds {
        *counts.entry(resolve_random_layers(8, 2, seed).unwrap()).or_default() += 1;
    }
    assert_eq!(counts.len(), 28);
    for (pair, n) in counts {
        let freq = n as f64 / seeds as f64;
        assert!((freq - 1.0 / 28.0).abs() <= 0.01, "{pair:?}: {freq}");
    }
}
