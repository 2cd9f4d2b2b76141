//! Frequency-domain features of temporal signals.
//!
//! For each hidden dimension the feature is the largest magnitude among the
//! non-DC bins of the unnormalized DFT of that dimension's temporal signal.
//! The DC bin only carries the signal's overall offset and is skipped.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

pub use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::SignalMatrix;
use crate::trace::NodeTag;

/// How a temporal signal is reduced to one scalar per dimension.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// Max non-DC DFT magnitude.
    FftMax,
    /// Signed maximum of the raw signal.
    TimeMax,
    /// Maximum absolute value of the raw signal.
    TimeMaxAbs,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::FftMax => "fft_max",
            FeatureMode::TimeMax => "time_max",
            FeatureMode::TimeMaxAbs => "time_max_abs",
        }
    }

    /// Shortest signal the mode accepts.
    pub fn min_signal_len(self) -> usize {
        match self {
            FeatureMode::FftMax => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "fft_max" => Ok(FeatureMode::FftMax),
            "time_max" => Ok(FeatureMode::TimeMax),
            "time_max_abs" => Ok(FeatureMode::TimeMaxAbs),
            other => Err(Error::Config(format!("unknown feature mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFeature {
    pub values: Vec<f64>,
    pub mode: FeatureMode,
    pub layers: Vec<usize>,
    pub nodes: Vec<NodeTag>,
    pub signal_len: usize,
    /// Frequency bin of each maximum (fft_max only); ties go to the lowest bin.
    pub peak_bins: Option<Vec<usize>>,
}

/// A planned transform for one signal length. Reuse it across columns and records.
#[derive(Clone)]
pub struct Dft {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("len", &self.len).finish()
    }
}

impl Dft {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::Domain("DFT of an empty signal".into()));
        }
        let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
        Ok(Self { fft, len })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `Y_k = Σ_n x_n e^{-2πi nk/N}` for k in `[0, N)`, no normalization.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        if x.len() != self.len {
            return Err(Error::Shape(format!("signal of length {} for a {}-point DFT", x.len(), self.len)));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite sample".into()));
        }
        let mut buf: Vec<Complex64> = x.iter().map(|&re| Complex64::new(re, 0.0)).collect();
        self.fft.process(&mut buf);
        Ok(buf)
    }

    /// Largest `|Y_k|` over `1 <= k < N` and the bin where it occurs.
    pub fn max_non_dc(&self, x: &[f64]) -> Result<(f64, usize)> {
        if self.len < 2 {
            return Err(Error::Domain("signal of length 1 has no non-DC bin".into()));
        }
        // a constant shift only moves the DC bin; constant signals come out exactly zero
        let shifted: Vec<f64> = x.iter().map(|&v| v - x[0]).collect();
        let magnitudes: Vec<f64> = self.transform(&shifted)?.iter().map(|y| y.norm()).collect();
        let max = magnitudes[1..].iter().copied().fold(0.0, f64::max);
        // conjugate bins differ only by rounding; treat them as tied
        let floor = max * (1.0 - 1e-12);
        let bin = (1..self.len).find(|&k| magnitudes[k] >= floor).unwrap_or(1);
        Ok((max, bin))
    }
}

pub fn dft(x: &[f64]) -> Result<Vec<Complex64>> {
    Dft::new(x.len())?.transform(x)
}

/// Magnitudes `|Y_k|` for every bin.
pub fn magnitude_spectrum(x: &[f64]) -> Result<Vec<f64>> {
    Ok(dft(x)?.iter().map(|y| y.norm()).collect())
}

pub fn spectral_feature(t: &SignalMatrix) -> Result<SpectralFeature> {
    let n = t.signal_len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "fft_max needs a signal of length >= 2, selection gives {n}"
        )));
    }
    spectral_feature_with(&Dft::new(n)?, t)
}

/// As [`spectral_feature`], reusing a transform planned for `t`'s signal length.
pub fn spectral_feature_with(plan: &Dft, t: &SignalMatrix) -> Result<SpectralFeature> {
    let n = t.signal_len();
    if plan.len() != n {
        return Err(Error::Shape(format!("{}-point plan for a signal of length {n}", plan.len())));
    }
    let mut column = vec![0.0; n];
    let mut values = Vec::with_capacity(t.hidden_dim());
    let mut peaks = Vec::with_capacity(t.hidden_dim());
    for col in t.data.columns() {
        for (dst, &v) in column.iter_mut().zip(col.iter()) {
            *dst = v;
        }
        let (value, bin) = plan.max_non_dc(&column)?;
        values.push(value);
        peaks.push(bin);
    }
    Ok(SpectralFeature {
        values,
        mode: FeatureMode::FftMax,
        layers: t.layer_ids.clone(),
        nodes: t.node_tags.clone(),
        signal_len: n,
        peak_bins: Some(peaks),
    })
}

/// Signed per-column maximum of the raw signal.
pub fn time_max_feature(t: &SignalMatrix) -> Result<SpectralFeature> {
    time_max_impl(t, false)
}

/// Per-column maximum of `|x|`.
pub fn time_max_abs_feature(t: &SignalMatrix) -> Result<SpectralFeature> {
    time_max_impl(t, true)
}

fn time_max_impl(t: &SignalMatrix, abs: bool) -> Result<SpectralFeature> {
    if t.signal_len() == 0 {
        return Err(Error::Shape("empty signal matrix".into()));
    }
    let values = t
        .data
        .columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .map(|&v| if abs { v.abs() } else { v })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(SpectralFeature {
        values,
        mode: if abs { FeatureMode::TimeMaxAbs } else { FeatureMode::TimeMax },
        layers: t.layer_ids.clone(),
        nodes: t.node_tags.clone(),
        signal_len: t.signal_len(),
        peak_bins: None,
    })
}

/// Computes the feature for `mode`; `plan` must match the signal length when mode is fft_max.
pub fn extract(mode: FeatureMode, plan: Option<&Dft>, t: &SignalMatrix) -> Result<SpectralFeature> {
    match mode {
        FeatureMode::FftMax => match plan {
            Some(p) => spectral_feature_with(p, t),
            None => spectral_feature(t),
        },
        FeatureMode::TimeMax => time_max_feature(t),
        FeatureMode::TimeMaxAbs => time_max_abs_feature(t),
    }
}
