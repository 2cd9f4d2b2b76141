//! Browser demo: explore how a spectral anomaly shows up in a temporal
//! signal, its DFT, the per-dimension features, and a small detector.
//!
//! Every exported function takes plain numbers and returns a JSON string so
//! the page needs no bindings beyond `JSON.parse`.

use hsad::detector::TrainConfig;
use hsad::evaluation::{auroc, evaluate, split};
use hsad::features::Featurizer;
use hsad::spectral::{magnitude_spectrum, Dft};
use hsad::synthetic::{anomaly_signal, generate_synthetic};
use hsad::{FeatureMode, FeatureSet, SelectionSpec, SyntheticSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
pub struct SignalView {
    pub signal: Vec<f64>,
    pub spectrum: Vec<f64>,
    pub fft_max: f64,
    pub peak_bin: usize,
    pub time_max: f64,
}

/// One random-walk signal with an injected tone, and its magnitude spectrum.
pub fn signal_view(len: usize, bin: usize, amplitude: f64, offset: f64, seed: u64) -> Result<SignalView, String> {
    if len < 2 {
        return Err("signal length must be at least 2".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = anomaly_signal(&mut rng, len, bin % len, amplitude, offset);
    let spectrum = magnitude_spectrum(&signal).map_err(|e| e.to_string())?;
    let (fft_max, peak_bin) = Dft::new(len).and_then(|p| p.max_non_dc(&signal)).map_err(|e| e.to_string())?;
    let time_max = signal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(SignalView { signal, spectrum, fft_max, peak_bin, time_max })
}

#[derive(Clone, Debug, Serialize)]
pub struct DemoParams {
    pub layers: usize,
    pub dim: usize,
    pub count: usize,
    pub anomaly_dims: usize,
    pub bin: usize,
    pub amplitude: f64,
    pub offset_range: f64,
    pub seed: u64,
}

impl DemoParams {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            anomaly_dims: (0..self.anomaly_dims.min(self.dim)).collect(),
            anomaly_bin: self.bin,
            anomaly_amplitude: self.amplitude,
            column_offset_range: self.offset_range,
            seed: self.seed,
            ..SyntheticSpec::new(self.layers, self.dim, self.count)
        }
    }

    fn features(&self, mode: FeatureMode) -> Result<FeatureSet, String> {
        let (header, records) = generate_synthetic(&self.spec()).map_err(|e| e.to_string())?;
        let featurizer = Featurizer::new(&header, &SelectionSpec::default(), mode).map_err(|e| e.to_string())?;
        let records = featurizer.features(&records, 1).map_err(|e| e.to_string())?;
        let set = FeatureSet {
            header: hsad::FeatureHeader {
                dim: header.hidden_dim,
                count: records.len(),
                mode,
                nodes: featurizer.selection().nodes.clone(),
                layers: featurizer.selection().layers.clone(),
                signal_len: featurizer.selection().signal_len(),
                source_digest: String::new(),
                obs_point: None,
                tau: None,
            },
            records,
        };
        Ok(set)
    }
}

#[derive(Debug, Serialize)]
pub struct DimensionScores {
    /// Per-dimension AUROC of the raw feature value as a score.
    pub fft_max: Vec<f64>,
    pub time_max: Vec<f64>,
    pub anomaly_dims: usize,
}

fn per_dimension_auroc(set: &FeatureSet) -> Result<Vec<f64>, String> {
    let labels = set.labels().map_err(|e| e.to_string())?;
    (0..set.header.dim)
        .map(|i| {
            let scores: Vec<f64> = set.records.iter().map(|r| r.values[i] as f64).collect();
            auroc(&scores, &labels).map_err(|e| e.to_string())
        })
        .collect()
}

/// How well each dimension's feature alone separates the classes, for both feature modes.
pub fn dimension_scores(p: &DemoParams) -> Result<DimensionScores, String> {
    Ok(DimensionScores {
        fft_max: per_dimension_auroc(&p.features(FeatureMode::FftMax)?)?,
        time_max: per_dimension_auroc(&p.features(FeatureMode::TimeMax)?)?,
        anomaly_dims: p.anomaly_dims.min(p.dim),
    })
}

#[derive(Debug, Serialize)]
pub struct DetectionResult {
    pub fft_max: ModeResult,
    pub time_max: ModeResult,
}

#[derive(Debug, Serialize)]
pub struct ModeResult {
    pub auroc: f64,
    pub acc: f64,
    pub epoch_losses: Vec<f64>,
}

/// Trains a compact detector on each feature mode and scores it on a held-out 30%.
pub fn detection(p: &DemoParams, epochs: usize) -> Result<DetectionResult, String> {
    let config = TrainConfig {
        epochs,
        batch_size: 64,
        hidden_sizes: vec![64, 32],
        allow_any_width: true,
        seed: p.seed,
        ..Default::default()
    };
    let run = |mode| -> Result<ModeResult, String> {
        let set = p.features(mode)?;
        let (train, test) = split(&set.records, 0.3, p.seed).map_err(|e| e.to_string())?;
        let (model, report) =
            hsad::detector::train(&set.with_records(train), &config).map_err(|e| e.to_string())?;
        let eval = evaluate(&model, &set.with_records(test)).map_err(|e| e.to_string())?;
        Ok(ModeResult { auroc: eval.auroc, acc: eval.acc, epoch_losses: report.epoch_losses })
    };
    Ok(DetectionResult { fft_max: run(FeatureMode::FftMax)?, time_max: run(FeatureMode::TimeMax)? })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = signalView)]
pub fn signal_view_js(len: usize, bin: usize, amplitude: f64, offset: f64, seed: u32) -> Result<String, JsValue> {
    to_js(signal_view(len, bin, amplitude, offset, seed as u64))
}

#[allow(clippy::too_many_arguments)]
fn params(layers: usize, dim: usize, count: usize, anomaly_dims: usize, bin: usize, amplitude: f64, offset_range: f64, seed: u32) -> DemoParams {
    DemoParams { layers, dim, count, anomaly_dims, bin, amplitude, offset_range, seed: seed as u64 }
}

#[wasm_bindgen(js_name = dimensionScores)]
#[allow(clippy::too_many_arguments)]
pub fn dimension_scores_js(
    layers: usize,
    dim: usize,
    count: usize,
    anomaly_dims: usize,
    bin: usize,
    amplitude: f64,
    offset_range: f64,
    seed: u32,
) -> Result<String, JsValue> {
    to_js(dimension_scores(&params(layers, dim, count, anomaly_dims, bin, amplitude, offset_range, seed)))
}

#[wasm_bindgen(js_name = detection)]
#[allow(clippy::too_many_arguments)]
pub fn detection_js(
    layers: usize,
    dim: usize,
    count: usize,
    anomaly_dims: usize,
    bin: usize,
    amplitude: f64,
    offset_range: f64,
    seed: u32,
    epochs: usize,
) -> Result<String, JsValue> {
    to_js(detection(&params(layers, dim, count, anomaly_dims, bin, amplitude, offset_range, seed), epochs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo() -> DemoParams {
        DemoParams { layers: 8, dim: 12, count: 400, anomaly_dims: 3, bin: 5, amplitude: 10.0, offset_range: 20.0, seed: 3 }
    }

    #[test]
    fn offset_moves_time_max_not_fft_max() {
        let a = signal_view(32, 5, 10.0, 0.0, 1).unwrap();
        let b = signal_view(32, 5, 10.0, 25.0, 1).unwrap();
        assert!((a.fft_max - b.fft_max).abs() < 1e-9);
        assert!((b.time_max - a.time_max - 25.0).abs() < 1e-9);
        assert_eq!(a.peak_bin, 5);
        assert_eq!(a.spectrum.len(), 32);
    }

    #[test]
    fn short_signal_is_rejected() {
        assert!(signal_view(1, 0, 1.0, 0.0, 0).is_err());
    }

    #[test]
    fn anomaly_dimensions_separate_under_fft() {
        let s = dimension_scores(&demo()).unwrap();
        assert_eq!(s.fft_max.len(), 12);
        assert!(s.fft_max[..3].iter().all(|&a| a > 0.9), "{:?}", s.fft_max);
        assert!(s.fft_max[3..].iter().all(|&a| (a - 0.5).abs() < 0.15), "{:?}", s.fft_max);
    }

    #[test]
    fn detection_reports_both_modes() {
        let r = detection(&demo(), 15).unwrap();
        assert_eq!(r.fft_max.epoch_losses.len(), 15);
        assert!(r.fft_max.auroc > 0.9, "{}", r.fft_max.auroc);
        assert!(r.fft_max.auroc >= r.time_max.auroc);
        let json = to_js(Ok(r)).unwrap();
        assert!(json.contains("\"time_max\""));
    }
}
