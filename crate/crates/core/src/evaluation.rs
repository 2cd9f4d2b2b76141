//! Labeling, train/test splitting and detection metrics.
//!
//! Hallucination is the positive class (label 1) everywhere.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{predict, DetectorModel};
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::spectral::FeatureMode;
use crate::trace::{NodeTag, ObservationPoint, TraceRecord};

/// A generation is a hallucination when its similarity to the reference is at most `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub tau: f64,
}

impl Default for LabelRule {
    fn default() -> Self {
        Self { tau: 0.5 }
    }
}

pub fn label_for(sim: f64, rule: LabelRule) -> u8 {
    u8::from(sim <= rule.tau)
}

/// Labels every record from its similarity score. Returns how many existing labels were overwritten.
pub fn apply_labels(records: &mut [TraceRecord], rule: LabelRule) -> Result<usize> {
    if !rule.tau.is_finite() {
        return Err(Error::Config(format!("tau {} is not finite", rule.tau)));
    }
    if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.sim_score.is_none()) {
        return Err(Error::Data(format!("record {i} ({:?}) has no similarity score", r.id)));
    }
    let mut overwritten = 0;
    for r in records.iter_mut() {
        let label = label_for(r.sim_score.expect("checked above"), rule);
        if r.label.is_some() {
            overwritten += 1;
        }
        r.label = Some(label);
    }
    Ok(overwritten)
}

/// Seeded shuffle, then the first `round(n * test_fraction)` items form the test set.
/// Returns `(train, test)`.
pub fn split<T: Clone>(items: &[T], test_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let n = items.len();
    let test_n = (n as f64 * test_fraction).round() as usize;
    if n < 2 || test_n == 0 || test_n == n {
        return Err(Error::Data(format!("cannot split {n} records with test fraction {test_fraction}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = order[..test_n].iter().map(|&i| items[i].clone()).collect();
    let train = order[test_n..].iter().map(|&i| items[i].clone()).collect();
    Ok((train, test))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        (self.tp + self.tn) as f64 / self.total() as f64
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Shape(format!("{a} predictions for {b} labels")));
    }
    if a == 0 {
        return Err(Error::Shape("empty input".into()));
    }
    Ok(())
}

pub fn confusion(predictions: &[u8], labels: &[u8]) -> Result<Confusion> {
    check_lengths(predictions.len(), labels.len())?;
    let mut c = Confusion::default();
    for (&p, &y) in predictions.iter().zip(labels) {
        match (p != 0, y != 0) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, true) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

pub fn acc(predictions: &[u8], labels: &[u8]) -> Result<f64> {
    Ok(confusion(predictions, labels)?.accuracy())
}

/// Probability that a random positive outscores a random negative, ties counting one half.
///
/// Computed from average ranks in O(n log n). Twice the Mann-Whitney U
/// statistic is accumulated as an integer, so the result equals the
/// pairwise count divided by `M * N` exactly.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    let positives = labels.iter().filter(|&&y| y != 0).count() as u64;
    let negatives = labels.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metric(format!(
            "AUROC needs both classes, got {positives} positive and {negatives} negative"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum over positives of twice their (1-based, tie-averaged) rank
    let mut twice_rank_sum: u64 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end share the average (start + 1 + end) / 2
        let twice_avg = (start + 1 + end) as u64;
        let pos_in_group = order[start..end].iter().filter(|&&i| labels[i] != 0).count() as u64;
        twice_rank_sum += twice_avg * pos_in_group;
        start = end;
    }
    let twice_u = twice_rank_sum - positives * (positives + 1);
    Ok(twice_u as f64 / (2 * positives * negatives) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub acc: f64,
    pub auroc: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub m_pos: usize,
    pub n_neg: usize,
    pub tau: Option<f64>,
    pub mode: FeatureMode,
    pub nodes: Vec<NodeTag>,
    pub layers: Vec<usize>,
    pub obs_point: Option<ObservationPoint>,
    pub seed: u64,
}

/// Scores a labeled feature set with a trained model.
pub fn evaluate(model: &DetectorModel, test: &FeatureSet) -> Result<EvalReport> {
    if model.input_dim != test.header.dim {
        return Err(Error::Shape(format!(
            "model expects dim {}, features have dim {}",
            model.input_dim, test.header.dim
        )));
    }
    let labels = test.labels()?;
    let x = crate::detector::feature_matrix(test);
    let (probs, bits) = predict(model, x.view())?;
    let c = confusion(&bits, &labels)?;
    let auroc = auroc(probs.as_slice().expect("contiguous"), &labels)?;
    let m_pos = labels.iter().filter(|&&y| y == 1).count();
    Ok(EvalReport {
        acc: c.accuracy(),
        auroc,
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        tn: c.tn,
        m_pos,
        n_neg: labels.len() - m_pos,
        tau: test.header.tau,
        mode: test.header.mode,
        nodes: test.header.nodes.clone(),
        layers: test.header.layers.clone(),
        obs_point: test.header.obs_point,
        seed: model.seed,
    })
}
