mod common;

use std::f64::consts::PI;

use common::{naive_dft, naive_max_non_dc};
use hsad::signal::SignalMatrix;
use hsad::spectral::{dft, spectral_feature, time_max_feature, Dft};
use hsad::synthetic::{generate_synthetic, SyntheticSpec};
use hsad::trace::NodeTag;
use hsad::SelectionSpec;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn column(x: &[f64]) -> SignalMatrix {
    SignalMatrix {
        data: Array2::from_shape_vec((x.len(), 1), x.to_vec()).unwrap(),
        layer_ids: vec![1],
        node_tags: NodeTag::ALL.to_vec(),
    }
}

#[test]
fn fft_matches_direct_summation() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [1, 2, 3, 4, 8, 31, 128, 257] {
        for _ in 0..20 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let fast = dft(&x).unwrap();
            for (k, (y, (re, im))) in fast.iter().zip(naive_dft(&x)).enumerate() {
                assert!((y.re - re).abs() < 1e-9 && (y.im - im).abs() < 1e-9, "N={n} k={k}");
            }
        }
    }
}

#[test]
fn feature_matches_naive_oracle_on_synthetic_records() {
    let spec = SyntheticSpec {
        anomaly_dims: vec![0, 3],
        anomaly_bin: 3,
        anomaly_amplitude: 4.0,
        seed: 11,
        ..SyntheticSpec::new(4, 6, 20)
    };
    let (header, records) = generate_synthetic(&spec).unwrap();
    for r in &records {
        let t = hsad::signal::build_signal_matrix(r, &header, &SelectionSpec::default()).unwrap();
        let f = spectral_feature(&t).unwrap();
        for (i, &v) in f.values.iter().enumerate() {
            let col: Vec<f64> = t.data.column(i).to_vec();
            assert!((v - naive_max_non_dc(&col)).abs() < 1e-9);
        }
    }
}

/// An anomaly dimension of a positive record peaks at the injected bin or its mirror.
#[test]
fn synthetic_anomaly_peaks_at_injected_bin() {
    let mut hits = 0;
    let trials = 400;
    for seed in 0..trials {
        let spec = SyntheticSpec {
            anomaly_dims: vec![0],
            anomaly_bin: 5,
            anomaly_amplitude: 10.0,
            positive_fraction: 0.5,
            seed,
            ..SyntheticSpec::new(8, 1, 2)
        };
        let (header, records) = generate_synthetic(&spec).unwrap();
        let positive = records.iter().find(|r| r.label == Some(1)).unwrap();
        let t = hsad::signal::build_signal_matrix(positive, &header, &SelectionSpec::default()).unwrap();
        let col: Vec<f64> = t.data.column(0).to_vec();
        // argmax by the naive oracle, not the implementation
        let mags: Vec<f64> = naive_dft(&col).iter().map(|(re, im)| re.hypot(*im)).collect();
        let peak = (1..32).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap();
        hits += usize::from(peak == 5 || peak == 27);
        assert_eq!(spectral_feature(&t).unwrap().peak_bins.unwrap()[0], 5);
    }
    assert!(hits as f64 / trials as f64 >= 0.99, "{hits}/{trials}");
}

fn signal(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    (2..max_len).prop_flat_map(|n| prop::collection::vec(-50.0..50.0f64, n))
}

proptest! {
    #[test]
    fn conjugate_symmetry(x in signal(200)) {
        let y = dft(&x).unwrap();
        let n = y.len();
        for k in 1..n {
            prop_assert!((y[k].norm() - y[n - k].norm()).abs() < 1e-9);
        }
    }

    #[test]
    fn parseval(x in signal(200)) {
        let energy: f64 = x.iter().map(|v| v * v).sum();
        let spectral: f64 = dft(&x).unwrap().iter().map(|y| y.norm_sqr()).sum::<f64>() / x.len() as f64;
        prop_assert!((energy - spectral).abs() <= 1e-6 * energy.max(1e-12));
    }

    #[test]
    fn linearity(pair in (2usize..100).prop_flat_map(|n| (
        prop::collection::vec(-10.0..10.0f64, n),
        prop::collection::vec(-10.0..10.0f64, n),
    )), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let (x, y) = pair;
        let mixed: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let (fx, fy, fm) = (dft(&x).unwrap(), dft(&y).unwrap(), dft(&mixed).unwrap());
        for k in 0..x.len() {
            let expect = fx[k] * a + fy[k] * b;
            prop_assert!((fm[k] - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn offset_invariance(x in signal(130), c in -1e3..1e3f64) {
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let a = spectral_feature(&column(&x)).unwrap().values[0];
        let b = spectral_feature(&column(&shifted)).unwrap().values[0];
        prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        // time-max moves by exactly the offset
        let ta = time_max_feature(&column(&x)).unwrap().values[0];
        let tb = time_max_feature(&column(&shifted)).unwrap().values[0];
        prop_assert!((tb - ta - c).abs() < 1e-9);
    }

    #[test]
    fn positive_scaling(x in signal(130), c in 0.01..100.0f64) {
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let a = spectral_feature(&column(&x)).unwrap().values[0];
        let b = spectral_feature(&column(&scaled)).unwrap().values[0];
        prop_assert!((b - c * a).abs() <= 1e-9 * (1.0 + c * a));
    }

    #[test]
    fn cosine_gives_half_n_amplitude(n in 4usize..300, amp in 0.1..100.0f64, k0_frac in 0.0..1.0f64, offset in -50.0..50.0f64) {
        let k0 = 1 + ((k0_frac * ((n - 1) / 2) as f64) as usize).min((n - 1) / 2 - 1);
        prop_assume!(2 * k0 < n);
        let x: Vec<f64> = (0..n).map(|t| offset + amp * (2.0 * PI * (k0 * t) as f64 / n as f64).cos()).collect();
        let plan = Dft::new(n).unwrap();
        let (value, bin) = plan.max_non_dc(&x).unwrap();
        let expect = amp * n as f64 / 2.0;
        prop_assert!((value - expect).abs() <= 1e-6 * expect);
        prop_assert_eq!(bin, k0);
    }
}
