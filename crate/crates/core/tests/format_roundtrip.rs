use hsad::detector::{init_model_any_width, read_model, write_model};
use hsad::features::{read_features, write_features};
use hsad::trace::{read_traces, write_traces};
use hsad::{
    FeatureHeader, FeatureMode, FeatureRecord, FeatureSet, NodeTag, ObservationPoint, TraceHeader, TraceRecord,
};
use proptest::prelude::*;

fn finite() -> impl Strategy<Value = f32> {
    -1e6f32..1e6f32
}

fn traces() -> impl Strategy<Value = (TraceHeader, Vec<TraceRecord>)> {
    (1usize..=8, prop::sample::subsequence(NodeTag::ALL.to_vec(), 1..=4), 1usize..=64, 0usize..6).prop_flat_map(
        |(layers, nodes, dim, count)| {
            let width = layers * nodes.len() * dim;
            let record = (
                "[a-z0-9-]{0,12}",
                prop::sample::select(ObservationPoint::ALL.to_vec()),
                prop::collection::vec(finite(), width),
                prop::option::of(-1.0..2.0f64),
                prop::option::of(0u8..=1),
                prop::option::of("[ -~]{0,20}"),
            )
                .prop_map(|(id, point, values, sim, label, question)| TraceRecord {
                    sim_score: sim,
                    label,
                    answer: question.as_ref().map(|q| q.to_uppercase()),
                    question,
                    ..TraceRecord::new(id, point, values)
                });
            let header = TraceHeader {
                model_name: "model".into(),
                num_layers: layers,
                hidden_dim: dim,
                node_order: nodes,
                record_count: count,
                dataset_name: "set".into(),
            };
            (Just(header), prop::collection::vec(record, count))
        },
    )
}

fn features() -> impl Strategy<Value = FeatureSet> {
    (1usize..=64, 0usize..10, prop::sample::select(vec![FeatureMode::FftMax, FeatureMode::TimeMax, FeatureMode::TimeMaxAbs]))
        .prop_flat_map(|(dim, count, mode)| {
            let record = ("[a-z0-9]{1,8}", prop::option::of(0u8..=1), prop::collection::vec(finite(), dim))
                .prop_map(|(id, label, values)| FeatureRecord { id, label, values });
            (
                Just((dim, mode)),
                prop::collection::vec(record, count),
                prop::option::of(prop::sample::select(ObservationPoint::ALL.to_vec())),
                prop::option::of(0.0..1.0f64),
            )
        })
        .prop_map(|((dim, mode), records, obs_point, tau)| FeatureSet {
            header: FeatureHeader {
                dim,
                count: records.len(),
                mode,
                nodes: vec![NodeTag::Ah, NodeTag::H],
                layers: vec![2, 5],
                signal_len: 4,
                source_digest: "00".repeat(32),
                obs_point,
                tau,
            },
            records,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn trace_files_round_trip((header, records) in traces()) {
        let mut bytes = Vec::new();
        let written = write_traces(&header, &records, &mut bytes).unwrap();
        prop_assert_eq!(written, bytes.len());
        let (h, r) = read_traces(bytes.as_slice()).unwrap();
        prop_assert_eq!(&h, &header);
        prop_assert_eq!(&r, &records);
        let mut again = Vec::new();
        write_traces(&h, &r, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }

    #[test]
    fn feature_files_round_trip(set in features()) {
        let mut bytes = Vec::new();
        write_features(&set, &mut bytes).unwrap();
        let back = read_features(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back, &set);
        // any strict prefix is rejected
        if bytes.len() > 1 {
            prop_assert!(read_features(&bytes[..bytes.len() - 1]).is_err());
        }
    }

    #[test]
    fn model_files_round_trip(
        input in 1usize..16,
        hidden in prop::collection::vec(1usize..24, 1..3),
        seed in any::<u64>(),
    ) {
        let mut model = init_model_any_width(input, &hidden, 0.1, seed).unwrap();
        for (i, layer) in model.hidden.iter_mut().enumerate() {
            layer.running_mean.fill(0.25 * i as f64);
            layer.running_var.fill(1.5);
        }
        let mut bytes = Vec::new();
        write_model(&model, &mut bytes).unwrap();
        let back = read_model(bytes.as_slice()).unwrap();
        prop_assert_eq!(back.input_dim, input);
        prop_assert_eq!(back.hidden_sizes(), hidden);
        for (a, b) in back.hidden.iter().zip(&model.hidden) {
            for (x, y) in a.weight.iter().zip(b.weight.iter()) {
                prop_assert_eq!(*x, *y as f32 as f64);
            }
        }
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        prop_assert_eq!(again, bytes);
    }
}
