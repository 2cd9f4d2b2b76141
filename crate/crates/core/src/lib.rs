//! Hallucination detection from hidden-state spectra.
//!
//! A trace captures, for one generation, the four per-layer node vectors of
//! every transformer layer. Reading one hidden dimension across all layers and
//! nodes in computation order gives a temporal signal; the largest non-DC
//! magnitude of its DFT is that dimension's feature. A small MLP classifies
//! the resulting feature vector.
//!
//! ```text
//! HST1 traces ──signal──▶ T[N][d] ──spectral──▶ f[d] (HSF1) ──detector──▶ p(hallucination)
//! ```

mod binfmt;
pub mod detector;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod signal;
pub mod spectral;
pub mod synthetic;
pub mod trace;

pub use detector::{DetectorModel, TrainConfig};
pub use error::{Error, Result};
pub use evaluation::{EvalReport, LabelRule};
pub use features::{FeatureHeader, FeatureRecord, FeatureSet, FeaturizeOptions};
pub use signal::{LayerSelection, SelectionSpec, SignalMatrix};
pub use spectral::{FeatureMode, SpectralFeature};
pub use synthetic::SyntheticSpec;
pub use trace::{NodeTag, ObservationPoint, TraceHeader, TraceRecord};
