//! Spectral-feature hallucination detector.
//!
//! A stack of affine → batch-norm → ReLU → dropout blocks narrows the input
//! down to 256 features; a single logit with a sigmoid gives the
//! hallucination probability. Training minimizes mean binary cross-entropy
//! plus an L1 penalty on the first affine layer, using Adam with decoupled
//! weight decay and a per-epoch cosine learning-rate schedule.

mod format;
mod model;
mod train;

pub use format::{read_model, write_model, MODEL_MAGIC};
pub use model::{
    bce, forward, init_model, init_model_any_width, loss, loss_and_gradients, predict, BnStats, DetectorModel,
    DetectorRng, ForwardPass, Gradients, HiddenLayer, LayerGrads, Mode, BN_EPS, BN_MOMENTUM, DEFAULT_HIDDEN,
    HEAD_WIDTH, LOG_CLAMP,
};
pub use train::{feature_matrix, train, train_arrays, TrainConfig, TrainReport};
