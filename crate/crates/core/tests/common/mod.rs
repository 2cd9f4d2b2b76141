//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::PI;

use hsad::detector::{init_model, loss, loss_and_gradients, BnStats, DetectorModel, DetectorRng};
use ndarray::Array2;
use rand::{Rng, SeedableRng};

/// Direct O(N²) evaluation of `Σ_n x_n e^{-2πi nk/N}`; returns (re, im) per bin.
pub fn naive_dft(x: &[f64]) -> Vec<(f64, f64)> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter().enumerate().fold((0.0, 0.0), |(re, im), (t, &v)| {
                // reduce nk mod N first to keep the angle small
                let angle = -2.0 * PI * ((t * k) % n) as f64 / n as f64;
                (re + v * angle.cos(), im + v * angle.sin())
            })
        })
        .collect()
}

/// Max non-DC magnitude by direct summation.
pub fn naive_max_non_dc(x: &[f64]) -> f64 {
    naive_dft(x)[1..].iter().map(|(re, im)| re.hypot(*im)).fold(0.0, f64::max)
}

/// Pairwise AUROC: every positive-negative pair scores 1, ½ or 0.
pub fn brute_auroc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut twice = 0u64;
    let mut pairs = 0u64;
    for (i, &yi) in labels.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in labels.iter().enumerate() {
            if yj != 0 {
                continue;
            }
            pairs += 1;
            twice += if scores[i] > scores[j] {
                2
            } else if scores[i] == scores[j] {
                1
            } else {
                0
            };
        }
    }
    twice as f64 / (2 * pairs) as f64
}

pub struct GradCheck {
    /// ‖analytic − numeric‖ / (‖analytic‖ + ‖numeric‖) over compared components.
    pub relative_error: f64,
    pub compared: usize,
    /// Components whose ±ε interval straddles a ReLU or L1 kink.
    pub skipped: usize,
}

fn objective(model: &DetectorModel, x: &Array2<f64>, labels: &[u8], l1: f64) -> (f64, Vec<bool>) {
    let pass = model.forward_pass(x.view(), BnStats::Batch, None).unwrap();
    let value = loss(pass.probs.as_slice().unwrap(), labels, model, l1).unwrap();
    (value, pass.active_units())
}

/// Central finite differences (ε = 1e-3) on a d=8, hidden=[256], batch-16 model in
/// train-mode batch-norm without dropout, compared with backpropagation.
pub fn gradient_check(seed: u64) -> GradCheck {
    let eps = 1e-3;
    let l1 = 1e-3;
    let mut rng = DetectorRng::seed_from_u64(seed);
    let mut model = init_model(8, &[256], 0.0, seed).unwrap();
    for g in model.hidden[0].gamma.iter_mut() {
        *g = rng.random_range(0.5..1.5);
    }
    for b in model.hidden[0].beta.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    let x = Array2::from_shape_fn((16, 8), |_| rng.random_range(-2.0..2.0));
    let labels: Vec<u8> = (0..16).map(|_| u8::from(rng.random_bool(0.5))).collect();

    let (_, grads, _) = loss_and_gradients(&model, x.view(), &labels, l1, None).unwrap();
    let analytic: Vec<Vec<f64>> = grads.slices().iter().map(|s| s.to_vec()).collect();

    let (mut diff, mut norm_a, mut norm_n) = (0.0, 0.0, 0.0);
    let (mut compared, mut skipped) = (0, 0);
    let lens: Vec<usize> = model.parameters_mut().iter().map(|p| p.len()).collect();
    for (slot, &len) in lens.iter().enumerate() {
        #[allow(clippy::needless_range_loop)]
        for i in 0..len {
            let original = model.parameters_mut()[slot][i];
            model.parameters_mut()[slot][i] = original + eps;
            let (plus, pattern_plus) = objective(&model, &x, &labels, l1);
            model.parameters_mut()[slot][i] = original - eps;
            let (minus, pattern_minus) = objective(&model, &x, &labels, l1);
            model.parameters_mut()[slot][i] = original;

            // slot 0 is W₁, the only L1-penalized tensor
            let l1_kink = slot == 0 && original.abs() <= eps;
            if pattern_plus != pattern_minus || l1_kink {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[slot][i];
            diff += (a - numeric).powi(2);
            norm_a += a * a;
            norm_n += numeric * numeric;
            compared += 1;
        }
    }
    GradCheck { relative_error: diff.sqrt() / (norm_a.sqrt() + norm_n.sqrt()), compared, skipped }
}
