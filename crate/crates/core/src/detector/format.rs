//! HSM1 model files.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{DetectorModel, HiddenLayer, TrainConfig};
use crate::binfmt::{self, CountingWriter};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"HSM1";

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    input_dim: usize,
    hidden_sizes: Vec<usize>,
    dropout_rate: f64,
    bn_eps: f64,
    bn_momentum: f64,
    seed: u64,
    train_config: Option<TrainConfig>,
}

fn narrow<'a>(values: impl IntoIterator<Item = &'a f64>) -> Vec<f32> {
    values.into_iter().map(|&v| v as f32).collect()
}

/// Writes the model with every parameter narrowed to float32.
pub fn write_model<W: Write>(model: &DetectorModel, sink: W) -> Result<usize> {
    model.validate()?;
    let header = ModelHeader {
        input_dim: model.input_dim,
        hidden_sizes: model.hidden_sizes(),
        dropout_rate: model.dropout_rate,
        bn_eps: model.bn_eps,
        bn_momentum: model.bn_momentum,
        seed: model.seed,
        train_config: model.train_config.clone(),
    };
    let mut w = CountingWriter::new(sink);
    binfmt::write_preamble(&mut w, MODEL_MAGIC, &header)?;
    for l in &model.hidden {
        binfmt::write_f32s(&mut w, narrow(l.weight.iter()))?;
        for a in [&l.bias, &l.gamma, &l.beta, &l.running_mean, &l.running_var] {
            binfmt::write_f32s(&mut w, narrow(a.iter()))?;
        }
    }
    binfmt::write_f32s(&mut w, narrow(model.head_weight.iter()))?;
    binfmt::write_f32s(&mut w, [model.head_bias as f32])?;
    w.flush()?;
    Ok(w.written)
}

pub fn read_model<R: Read>(mut source: R) -> Result<DetectorModel> {
    let header: ModelHeader = binfmt::read_preamble(&mut source, MODEL_MAGIC)?;
    if header.input_dim == 0 || header.hidden_sizes.is_empty() || header.hidden_sizes.contains(&0) {
        return Err(Error::Format("model header has an empty dimension".into()));
    }
    let mut vector = |len: usize, what: &str| -> Result<Array1<f64>> {
        Ok(binfmt::read_f32s(&mut source, len, what)?.into_iter().map(f64::from).collect())
    };

    let mut hidden = Vec::with_capacity(header.hidden_sizes.len());
    let mut fan_in = header.input_dim;
    for (i, &width) in header.hidden_sizes.iter().enumerate() {
        let what = format!("hidden layer {i}");
        let weight = Array2::from_shape_vec((width, fan_in), vector(width * fan_in, &what)?.to_vec())
            .expect("shape matches length");
        hidden.push(HiddenLayer {
            weight,
            bias: vector(width, &what)?,
            gamma: vector(width, &what)?,
            beta: vector(width, &what)?,
            running_mean: vector(width, &what)?,
            running_var: vector(width, &what)?,
        });
        fan_in = width;
    }
    let head_weight = vector(fan_in, "head")?;
    let head_bias = vector(1, "head")?[0];
    binfmt::expect_eof(&mut source)?;

    let model = DetectorModel {
        input_dim: header.input_dim,
        hidden,
        head_weight,
        head_bias,
        dropout_rate: header.dropout_rate,
        bn_eps: header.bn_eps,
        bn_momentum: header.bn_momentum,
        seed: header.seed,
        train_config: header.train_config,
    };
    model.validate()?;
    Ok(model)
}
