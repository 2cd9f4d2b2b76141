//! Seeded synthetic captures with a known spectral signature.
//!
//! Each dimension's temporal signal (length `4 * num_layers`, computation
//! order) is a Gaussian random walk. Positive records additionally carry a
//! cosine at `anomaly_bin` on every anomaly dimension, so the ground-truth
//! spectrum of a positive anomaly column peaks at that bin.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{NodeTag, ObservationPoint, TraceHeader, TraceRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub record_count: usize,
    pub anomaly_dims: Vec<usize>,
    pub anomaly_bin: usize,
    pub anomaly_amplitude: f64,
    pub positive_fraction: f64,
    pub seed: u64,
    /// Half-width of a uniform constant added to each column of each record; 0 disables it.
    #[serde(default)]
    pub column_offset_range: f64,
    /// One record per sample and observation point.
    #[serde(default = "default_points")]
    pub observation_points: Vec<ObservationPoint>,
}

fn default_points() -> Vec<ObservationPoint> {
    vec![ObservationPoint::AEnd]
}

impl SyntheticSpec {
    pub fn new(num_layers: usize, hidden_dim: usize, record_count: usize) -> Self {
        Self {
            num_layers,
            hidden_dim,
            record_count,
            anomaly_dims: Vec::new(),
            anomaly_bin: 2,
            anomaly_amplitude: 1.0,
            positive_fraction: 0.5,
            seed: 0,
            column_offset_range: 0.0,
            observation_points: default_points(),
        }
    }

    /// Signal length in computation order.
    pub fn signal_len(&self) -> usize {
        4 * self.num_layers
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.record_count == 0 {
            return Err(Error::Config("layers, dim and count must be positive".into()));
        }
        let n = self.signal_len();
        if self.anomaly_bin < 2 || 2 * self.anomaly_bin >= n {
            return Err(Error::Config(format!(
                "anomaly bin {} outside [2, {n}/2) for signal length {n}",
                self.anomaly_bin
            )));
        }
        if let Some(&d) = self.anomaly_dims.iter().find(|&&d| d >= self.hidden_dim) {
            return Err(Error::Config(format!("anomaly dim {d} >= hidden dim {}", self.hidden_dim)));
        }
        // zero amplitude is accepted: it yields the chance-level control set
        if !(self.anomaly_amplitude >= 0.0 && self.anomaly_amplitude.is_finite()) {
            return Err(Error::Config(format!("amplitude {}", self.anomaly_amplitude)));
        }
        if !(self.positive_fraction > 0.0 && self.positive_fraction < 1.0) {
            return Err(Error::Config(format!(
                "positive fraction {} outside (0, 1)",
                self.positive_fraction
            )));
        }
        if !(self.column_offset_range >= 0.0 && self.column_offset_range.is_finite()) {
            return Err(Error::Config(format!("offset range {}", self.column_offset_range)));
        }
        if self.observation_points.is_empty() {
            return Err(Error::Config("no observation points".into()));
        }
        Ok(())
    }
}

/// Random walk of unit-variance Gaussian steps, plus `amplitude * cos(2π·bin·n/N)` and a constant offset.
pub fn anomaly_signal<R: Rng>(rng: &mut R, len: usize, bin: usize, amplitude: f64, offset: f64) -> Vec<f64> {
    let mut level = 0.0;
    (0..len)
        .map(|n| {
            let step: f64 = rng.sample(StandardNormal);
            level += step;
            let tone = if amplitude != 0.0 {
                amplitude * (2.0 * PI * (bin * n) as f64 / len as f64).cos()
            } else {
                0.0
            };
            level + tone + offset
        })
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let positives = (spec.record_count as f64 * spec.positive_fraction).floor() as usize;
    let mut labels: Vec<u8> = (0..spec.record_count).map(|i| u8::from(i < positives)).collect();
    labels.shuffle(&mut rng);

    let mut is_anomaly_dim = vec![false; spec.hidden_dim];
    for &d in &spec.anomaly_dims {
        is_anomaly_dim[d] = true;
    }

    let n = spec.signal_len();
    let d = spec.hidden_dim;
    let mut records = Vec::with_capacity(spec.record_count * spec.observation_points.len());
    for (sample, &label) in labels.iter().enumerate() {
        for &point in &spec.observation_points {
            let mut values = vec![0f32; n * d];
            for dim in 0..d {
                let amplitude = if label == 1 && is_anomaly_dim[dim] { spec.anomaly_amplitude } else { 0.0 };
                let offset = if spec.column_offset_range > 0.0 {
                    rng.random_range(-spec.column_offset_range..=spec.column_offset_range)
                } else {
                    0.0
                };
                let signal = anomaly_signal(&mut rng, n, spec.anomaly_bin, amplitude, offset);
                // time index t = 4 * layer + node rank maps straight onto the layer-major layout
                for (t, v) in signal.into_iter().enumerate() {
                    values[t * d + dim] = v as f32;
                }
            }
            let id = if spec.observation_points.len() == 1 {
                format!("syn-{sample:06}")
            } else {
                format!("syn-{sample:06}-{point}")
            };
            let mut record = TraceRecord::new(id, point, values);
            record.label = Some(label);
            records.push(record);
        }
    }

    let header = TraceHeader {
        model_name: "synthetic".into(),
        num_layers: spec.num_layers,
        hidden_dim: d,
        node_order: NodeTag::ALL.to_vec(),
        record_count: records.len(),
        dataset_name: format!("synthetic-seed{}", spec.seed),
    };
    Ok((header, records))
}
