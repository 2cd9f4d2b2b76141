use std::f64::consts::PI;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::model::{init_model, init_model_any_width, loss_and_gradients, DetectorModel, DetectorRng, DEFAULT_HIDDEN};
use crate::error::{Error, Result};
use crate::features::FeatureSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub l1_lambda: f64,
    pub dropout_rate: f64,
    pub seed: u64,
    pub hidden_sizes: Vec<usize>,
    /// Skip the rule that the last hidden width is 256.
    #[serde(default)]
    pub allow_any_width: bool,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            initial_lr: 5e-4,
            batch_size: 128,
            weight_decay: 1e-4,
            l1_lambda: 1e-5,
            dropout_rate: 0.1,
            seed: 0,
            hidden_sizes: DEFAULT_HIDDEN.to_vec(),
            allow_any_width: false,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size < 2 {
            return bad("batch size must be at least 2");
        }
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.l1_lambda >= 0.0) {
            return bad("weight decay and L1 lambda must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps.is_nan() || self.adam_eps <= 0.0 {
            return bad("invalid Adam hyperparameters");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout rate must lie in [0, 1)");
        }
        Ok(())
    }

    /// `initial_lr · ½(1 + cos(π·epoch/epochs))`, epoch zero-based.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.initial_lr * 0.5 * (1.0 + (PI * epoch as f64 / self.epochs as f64).cos())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_losses.last().copied()
    }
}

/// Adam with decoupled weight decay.
struct Adam {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    fn new(model: &mut DetectorModel, config: &TrainConfig) -> Self {
        let shapes: Vec<usize> = model.parameters_mut().iter().map(|p| p.len()).collect();
        Self {
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.adam_eps,
        }
    }

    fn update(&mut self, params: Vec<&mut [f64]>, grads: Vec<&[f64]>, lr: f64, weight_decay: f64) {
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step);
        let bc2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * (m_hat / (v_hat.sqrt() + self.eps) + weight_decay * p[i]);
            }
        }
    }
}

/// Dense `[records][dim]` matrix of a feature set.
pub fn feature_matrix(set: &FeatureSet) -> Array2<f64> {
    let dim = set.header.dim;
    Array2::from_shape_fn((set.records.len(), dim), |(r, c)| f64::from(set.records[r].values[c]))
}

pub fn train(features: &FeatureSet, config: &TrainConfig) -> Result<(DetectorModel, TrainReport)> {
    let labels = features.labels()?;
    train_arrays(feature_matrix(features).view(), &labels, config)
}

/// Splits shuffled indices into batches; a trailing batch of one joins the previous batch.
fn batches(order: &[usize], batch_size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(batch_size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * batch_size;
        *out.last_mut().expect("at least one batch") = &order[start..];
    }
    out
}

pub fn train_arrays(x: ArrayView2<f64>, labels: &[u8], config: &TrainConfig) -> Result<(DetectorModel, TrainReport)> {
    config.validate()?;
    if x.nrows() != labels.len() {
        return Err(Error::Shape(format!("{} rows for {} labels", x.nrows(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::Data(format!("label {bad} is not binary")));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Data(format!(
            "training data must contain both classes ({positives} of {} positive)",
            labels.len()
        )));
    }

    let mut model = if config.allow_any_width {
        init_model_any_width(x.ncols(), &config.hidden_sizes, config.dropout_rate, config.seed)?
    } else {
        init_model(x.ncols(), &config.hidden_sizes, config.dropout_rate, config.seed)?
    };
    let mut rng = DetectorRng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut adam = Adam::new(&mut model, config);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 0..config.epochs {
        let lr = config.learning_rate(epoch);
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for batch in batches(&order, config.batch_size) {
            let bx = x.select(Axis(0), batch);
            let by: Vec<u8> = batch.iter().map(|&i| labels[i]).collect();
            let dropout = (config.dropout_rate > 0.0).then_some(&mut rng);
            let (value, grads, pass) = loss_and_gradients(&model, bx.view(), &by, config.l1_lambda, dropout)?;
            model.update_running_stats(&pass);
            adam.update(model.parameters_mut(), grads.slices(), lr, config.weight_decay);
            weighted += value * batch.len() as f64;
        }
        let mean = weighted / labels.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Data(format!("training diverged at epoch {epoch}")));
        }
        report.epoch_losses.push(mean);
    }

    model.train_config = Some(config.clone());
    Ok((model, report))
}
