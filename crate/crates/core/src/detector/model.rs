use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::distr::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainConfig;
use crate::error::{Error, Result};

/// Width of the representation fed to the classifier head.
pub const HEAD_WIDTH: usize = 256;
pub const DEFAULT_HIDDEN: [usize; 3] = [1024, 512, 256];
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
/// Log arguments in the cross-entropy are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]`.
pub const LOG_CLAMP: f64 = 1e-12;

pub type DetectorRng = ChaCha8Rng;

/// Affine → batch-norm → ReLU → dropout.
#[derive(Clone, Debug, PartialEq)]
pub struct HiddenLayer {
    /// `[out][in]`.
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl HiddenLayer {
    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub input_dim: usize,
    pub hidden: Vec<HiddenLayer>,
    pub head_weight: Array1<f64>,
    pub head_bias: f64,
    pub dropout_rate: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    pub seed: u64,
    pub train_config: Option<TrainConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Which statistics batch-norm normalizes with.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnStats {
    Batch,
    Running,
}

pub fn init_model(input_dim: usize, hidden_sizes: &[usize], dropout_rate: f64, seed: u64) -> Result<DetectorModel> {
    if hidden_sizes.last() != Some(&HEAD_WIDTH) {
        return Err(Error::Config(format!(
            "hidden sizes {hidden_sizes:?} must end in {HEAD_WIDTH}"
        )));
    }
    init_model_any_width(input_dim, hidden_sizes, dropout_rate, seed)
}

/// [`init_model`] without the final-width check, for width ablations.
pub fn init_model_any_width(
    input_dim: usize,
    hidden_sizes: &[usize],
    dropout_rate: f64,
    seed: u64,
) -> Result<DetectorModel> {
    if input_dim == 0 {
        return Err(Error::Config("input dim must be positive".into()));
    }
    if hidden_sizes.is_empty() || hidden_sizes.contains(&0) {
        return Err(Error::Config(format!("invalid hidden sizes {hidden_sizes:?}")));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Config(format!("dropout rate {dropout_rate} outside [0, 1)")));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut uniform_fill = |fan_in: usize, len: usize| -> Vec<f64> {
        let bound = (1.0 / fan_in as f64).sqrt();
        let dist = Uniform::new(-bound, bound).expect("positive bound");
        (0..len).map(|_| dist.sample(&mut rng)).collect()
    };

    let mut hidden = Vec::with_capacity(hidden_sizes.len());
    let mut fan_in = input_dim;
    for &width in hidden_sizes {
        let weight = Array2::from_shape_vec((width, fan_in), uniform_fill(fan_in, width * fan_in))
            .expect("shape matches length");
        let bias = Array1::from(uniform_fill(fan_in, width));
        hidden.push(HiddenLayer {
            weight,
            bias,
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        });
        fan_in = width;
    }
    let head_weight = Array1::from(uniform_fill(fan_in, fan_in));
    let head_bias = uniform_fill(fan_in, 1)[0];

    Ok(DetectorModel {
        input_dim,
        hidden,
        head_weight,
        head_bias,
        dropout_rate,
        bn_eps: BN_EPS,
        bn_momentum: BN_MOMENTUM,
        seed,
        train_config: None,
    })
}

pub(crate) struct LayerCache {
    input: Array2<f64>,
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    /// Batch-norm output before ReLU.
    normalized: Array2<f64>,
    mask: Option<Array2<f64>>,
    bn: BnStats,
    batch_mean: Array1<f64>,
    batch_var: Array1<f64>,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub struct ForwardPass {
    pub probs: Array1<f64>,
    pub logits: Array1<f64>,
    layers: Vec<LayerCache>,
    features: Array2<f64>,
}

impl ForwardPass {
    /// Which ReLU units fired, layer by layer in batch-major order.
    pub fn active_units(&self) -> Vec<bool> {
        self.layers.iter().flat_map(|c| c.normalized.iter().map(|&v| v > 0.0)).collect()
    }
}

/// Gradients laid out like the trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
    pub head_weight: Array1<f64>,
    pub head_bias: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

impl Gradients {
    /// Slices in the order of [`DetectorModel::parameters_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.layers.len() + 2);
        for g in &self.layers {
            out.push(g.weight.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("standard layout"));
            out.push(g.gamma.as_slice().expect("standard layout"));
            out.push(g.beta.as_slice().expect("standard layout"));
        }
        out.push(self.head_weight.as_slice().expect("standard layout"));
        out.push(std::slice::from_ref(&self.head_bias));
        out
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl DetectorModel {
    /// Total stored scalars, batch-norm running statistics included.
    pub fn parameter_count(&self) -> usize {
        self.hidden
            .iter()
            .map(|l| l.out_dim() * l.in_dim() + 5 * l.out_dim())
            .sum::<usize>()
            + self.head_weight.len()
            + 1
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.hidden.iter().map(HiddenLayer::out_dim).collect()
    }

    /// Trainable parameters: per layer `W, b, γ, β`, then the head weight and bias.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for l in &mut self.hidden {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            out.push(l.gamma.as_slice_mut().expect("standard layout"));
            out.push(l.beta.as_slice_mut().expect("standard layout"));
        }
        out.push(self.head_weight.as_slice_mut().expect("standard layout"));
        out.push(std::slice::from_mut(&mut self.head_bias));
        out
    }

    /// Checks finiteness and positive running variances.
    pub fn validate(&self) -> Result<()> {
        let mut expected_in = self.input_dim;
        for (i, l) in self.hidden.iter().enumerate() {
            let w = l.out_dim();
            if l.in_dim() != expected_in
                || l.bias.len() != w
                || l.gamma.len() != w
                || l.beta.len() != w
                || l.running_mean.len() != w
                || l.running_var.len() != w
            {
                return Err(Error::Format(format!("hidden layer {i} has inconsistent shapes")));
            }
            if l.running_var.iter().any(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::Data(format!("hidden layer {i} has a non-positive running variance")));
            }
            expected_in = w;
        }
        if self.head_weight.len() != expected_in {
            return Err(Error::Format("head width does not match last hidden layer".into()));
        }
        let finite = self.hidden.iter().all(|l| {
            [&l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var]
                .iter()
                .all(|a| a.iter().all(|v| v.is_finite()))
                && l.weight.iter().all(|v| v.is_finite())
        }) && self.head_weight.iter().all(|v| v.is_finite())
            && self.head_bias.is_finite();
        if !finite {
            return Err(Error::Data("model has non-finite parameters".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape(format!("input dim {} for a model of dim {}", x.ncols(), self.input_dim)));
        }
        if x.nrows() == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        Ok(())
    }

    /// Forward pass without touching running statistics. Dropout is applied when `dropout_rng` is given.
    pub fn forward_pass(
        &self,
        x: ArrayView2<f64>,
        bn: BnStats,
        mut dropout_rng: Option<&mut DetectorRng>,
    ) -> Result<ForwardPass> {
        self.check_input(&x)?;
        let batch = x.nrows();
        if bn == BnStats::Batch && batch < 2 {
            return Err(Error::Shape("batch statistics need at least 2 samples".into()));
        }

        let mut layers = Vec::with_capacity(self.hidden.len());
        let mut current = x.to_owned();
        for layer in &self.hidden {
            let z = current.dot(&layer.weight.t()) + &layer.bias;
            let (mean, var) = match bn {
                BnStats::Batch => {
                    let mean = z.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = (&z - &mean).mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty batch");
                    (mean, var)
                }
                BnStats::Running => (layer.running_mean.clone(), layer.running_var.clone()),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + self.bn_eps).sqrt());
            let xhat = (&z - &mean) * &inv_std;
            let normalized = &xhat * &layer.gamma + &layer.beta;
            let mut activated = normalized.mapv(|v| v.max(0.0));

            let mask = match dropout_rng.as_deref_mut() {
                Some(rng) if self.dropout_rate > 0.0 => {
                    let keep = 1.0 - self.dropout_rate;
                    let scale = 1.0 / keep;
                    let m = Array2::from_shape_fn(activated.raw_dim(), |_| {
                        if rng.random::<f64>() < keep { scale } else { 0.0 }
                    });
                    activated *= &m;
                    Some(m)
                }
                _ => None,
            };

            layers.push(LayerCache {
                input: std::mem::replace(&mut current, activated),
                xhat,
                inv_std,
                normalized,
                mask,
                bn,
                batch_mean: mean,
                batch_var: var,
            });
        }

        let logits = current.dot(&self.head_weight) + self.head_bias;
        let probs = logits.mapv(sigmoid);
        Ok(ForwardPass { probs, logits, layers, features: current })
    }

    /// Running ← (1 − momentum)·running + momentum·batch, with the unbiased batch variance.
    pub fn update_running_stats(&mut self, pass: &ForwardPass) {
        let m = self.bn_momentum;
        for (layer, cache) in self.hidden.iter_mut().zip(&pass.layers) {
            if cache.bn != BnStats::Batch {
                continue;
            }
            let b = cache.input.nrows() as f64;
            let unbiased = &cache.batch_var * (b / (b - 1.0));
            layer.running_mean = &layer.running_mean * (1.0 - m) + &cache.batch_mean * m;
            layer.running_var = &layer.running_var * (1.0 - m) + unbiased * m;
        }
    }

    /// Backpropagates `d loss / d logit` through the network.
    pub fn backward(&self, pass: &ForwardPass, dlogits: ArrayView1<f64>) -> Gradients {
        let head_weight = pass.features.t().dot(&dlogits);
        let head_bias = dlogits.sum();
        let mut upstream = dlogits
            .insert_axis(Axis(1))
            .dot(&self.head_weight.view().insert_axis(Axis(0)));

        let mut grads = Vec::with_capacity(self.hidden.len());
        for (layer, cache) in self.hidden.iter().zip(&pass.layers).rev() {
            let mut dy = upstream;
            if let Some(mask) = &cache.mask {
                dy *= mask;
            }
            Zip::from(&mut dy).and(&cache.normalized).for_each(|g, &v| {
                if v <= 0.0 {
                    *g = 0.0;
                }
            });
            let dgamma = (&dy * &cache.xhat).sum_axis(Axis(0));
            let dbeta = dy.sum_axis(Axis(0));
            let dxhat = dy * &layer.gamma;
            let dz = match cache.bn {
                BnStats::Batch => {
                    let b = dxhat.nrows() as f64;
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * &cache.xhat).sum_axis(Axis(0));
                    let centered = dxhat * b - &sum_dxhat - &cache.xhat * &sum_dxhat_xhat;
                    centered * &(&cache.inv_std / b)
                }
                BnStats::Running => dxhat * &cache.inv_std,
            };
            let dweight = dz.t().dot(&cache.input);
            let dbias = dz.sum_axis(Axis(0));
            upstream = dz.dot(&layer.weight);
            grads.push(LayerGrads { weight: dweight, bias: dbias, gamma: dgamma, beta: dbeta });
        }
        grads.reverse();
        Gradients { layers: grads, head_weight, head_bias }
    }

    /// Eval-mode probabilities.
    pub fn predict_proba(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        Ok(self.forward_pass(x, BnStats::Running, None)?.probs)
    }

    /// `Σ|W₁|` over the first hidden layer's weights.
    pub fn first_layer_l1(&self) -> f64 {
        self.hidden[0].weight.iter().map(|w| w.abs()).sum()
    }
}

/// Forward pass in the given mode. Train mode uses batch statistics, applies
/// dropout and updates the running statistics; it rejects batches of one.
pub fn forward(model: &mut DetectorModel, batch: ArrayView2<f64>, mode: Mode, rng: &mut DetectorRng) -> Result<Array1<f64>> {
    match mode {
        Mode::Train => {
            if batch.nrows() < 2 {
                return Err(Error::Shape("train-mode forward needs a batch of at least 2".into()));
            }
            let pass = model.forward_pass(batch, BnStats::Batch, Some(rng))?;
            model.update_running_stats(&pass);
            Ok(pass.probs)
        }
        Mode::Eval => model.predict_proba(batch),
    }
}

fn check_probs_labels(probs: &[f64], labels: &[u8]) -> Result<()> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Shape(format!("{} probabilities for {} labels", probs.len(), labels.len())));
    }
    Ok(())
}

/// Mean binary cross-entropy with clamped log arguments.
pub fn bce(probs: &[f64], labels: &[u8]) -> Result<f64> {
    check_probs_labels(probs, labels)?;
    let total: f64 = probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
            if y != 0 { -p.ln() } else { -(1.0 - p).ln() }
        })
        .sum();
    Ok(total / probs.len() as f64)
}

/// Mean cross-entropy plus `l1_lambda · Σ|W₁|`.
pub fn loss(probs: &[f64], labels: &[u8], model: &DetectorModel, l1_lambda: f64) -> Result<f64> {
    Ok(bce(probs, labels)? + l1_lambda * model.first_layer_l1())
}

/// Train-mode loss and its gradient with respect to every trainable parameter.
/// Running statistics are left untouched; the forward pass is returned for that.
pub fn loss_and_gradients(
    model: &DetectorModel,
    x: ArrayView2<f64>,
    labels: &[u8],
    l1_lambda: f64,
    dropout_rng: Option<&mut DetectorRng>,
) -> Result<(f64, Gradients, ForwardPass)> {
    let pass = model.forward_pass(x, BnStats::Batch, dropout_rng)?;
    let probs = pass.probs.as_slice().expect("standard layout");
    let value = loss(probs, labels, model, l1_lambda)?;
    let b = labels.len() as f64;
    let dlogits = Array1::from_iter(probs.iter().zip(labels).map(|(&p, &y)| (p - f64::from(y)) / b));
    let mut grads = model.backward(&pass, dlogits.view());
    if l1_lambda != 0.0 {
        Zip::from(&mut grads.layers[0].weight)
            .and(&model.hidden[0].weight)
            .for_each(|g, &w| *g += l1_lambda * sign(w));
    }
    Ok((value, grads, pass))
}

fn sign(w: f64) -> f64 {
    if w > 0.0 {
        1.0
    } else if w < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Eval-mode probabilities and hard predictions (`prob > 0.5`).
pub fn predict(model: &DetectorModel, features: ArrayView2<f64>) -> Result<(Array1<f64>, Vec<u8>)> {
    let probs = model.predict_proba(features)?;
    let bits = probs.iter().map(|&p| u8::from(p > 0.5)).collect();
    Ok((probs, bits))
}
