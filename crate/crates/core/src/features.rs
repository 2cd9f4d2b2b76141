//! HSF1 feature files and trace featurization.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::binfmt::{self, CountingWriter};
use crate::error::{Error, Result};
use crate::evaluation::{label_for, LabelRule};
use crate::signal::{build_resolved, ResolvedSelection, SelectionSpec};
use crate::spectral::{extract, Dft, FeatureMode};
use crate::trace::{NodeTag, ObservationPoint, TraceHeader, TraceReader, TraceRecord};

pub const FEATURE_MAGIC: &[u8; 4] = b"HSF1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub dim: usize,
    pub count: usize,
    pub mode: FeatureMode,
    pub nodes: Vec<NodeTag>,
    /// Resolved one-based layer indices.
    pub layers: Vec<usize>,
    #[serde(rename = "N")]
    pub signal_len: usize,
    /// Hex SHA-256 of the source trace file.
    pub source_digest: String,
    /// Observation-point filter applied while featurizing, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obs_point: Option<ObservationPoint>,
    /// Threshold used to relabel records from similarity scores, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureRecord {
    pub id: String,
    pub label: Option<u8>,
    pub values: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSet {
    pub header: FeatureHeader,
    pub records: Vec<FeatureRecord>,
}

#[derive(Serialize, Deserialize)]
struct FeatureMeta {
    id: String,
    label: Option<u8>,
}

impl FeatureSet {
    pub fn validate(&self) -> Result<()> {
        let h = &self.header;
        if h.dim == 0 {
            return Err(Error::Format("feature dim is zero".into()));
        }
        if h.count != self.records.len() {
            return Err(Error::Format(format!(
                "header declares {} records, {} present",
                h.count,
                self.records.len()
            )));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.values.len() != h.dim {
                return Err(Error::Format(format!("record {i} has {} values, dim is {}", r.values.len(), h.dim)));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("record {i} has a non-finite value")));
            }
            if matches!(r.label, Some(l) if l > 1) {
                return Err(Error::Data(format!("record {i} has an invalid label")));
            }
        }
        Ok(())
    }

    /// Same header with a different subset of records.
    pub fn with_records(&self, records: Vec<FeatureRecord>) -> FeatureSet {
        let mut header = self.header.clone();
        header.count = records.len();
        FeatureSet { header, records }
    }

    /// Labels, erroring on the first unlabeled record.
    pub fn labels(&self) -> Result<Vec<u8>> {
        self.records
            .iter()
            .map(|r| r.label.ok_or_else(|| Error::Data(format!("record {:?} is unlabeled", r.id))))
            .collect()
    }
}

pub fn write_features<W: Write>(set: &FeatureSet, sink: W) -> Result<usize> {
    set.validate()?;
    let mut w = CountingWriter::new(sink);
    binfmt::write_preamble(&mut w, FEATURE_MAGIC, &set.header)?;
    for r in &set.records {
        binfmt::write_json_block(&mut w, &FeatureMeta { id: r.id.clone(), label: r.label })?;
        binfmt::write_f32s(&mut w, r.values.iter().copied())?;
    }
    w.flush()?;
    Ok(w.written)
}

pub fn read_features<R: Read>(mut source: R) -> Result<FeatureSet> {
    let header: FeatureHeader = binfmt::read_preamble(&mut source, FEATURE_MAGIC)?;
    if header.dim == 0 {
        return Err(Error::Format("feature dim is zero".into()));
    }
    let mut records = Vec::with_capacity(header.count.min(1 << 16));
    for i in 0..header.count {
        let read = |src: &mut R| -> Result<FeatureRecord> {
            let meta: FeatureMeta = binfmt::read_json_block(src, "record metadata")?;
            let values = binfmt::read_f32s(src, header.dim, "feature values")?;
            Ok(FeatureRecord { id: meta.id, label: meta.label, values })
        };
        records.push(read(&mut source).map_err(|e| e.context(format!("record {i}")))?);
    }
    binfmt::expect_eof(&mut source)?;
    let set = FeatureSet { header, records };
    set.validate()?;
    Ok(set)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeaturizeOptions {
    /// Keep only records captured at this point; `None` keeps all.
    pub obs_point: Option<ObservationPoint>,
    /// Relabel from similarity scores before featurizing.
    pub label_rule: Option<LabelRule>,
    /// Worker threads; output order never depends on it.
    pub threads: usize,
}

impl Default for FeaturizeOptions {
    fn default() -> Self {
        Self { obs_point: Some(ObservationPoint::AEnd), label_rule: None, threads: 1 }
    }
}

struct HashingReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

/// Featurizer bound to one capture geometry.
pub struct Featurizer {
    header: TraceHeader,
    selection: ResolvedSelection,
    mode: FeatureMode,
    plan: Option<Dft>,
}

impl Featurizer {
    pub fn new(header: &TraceHeader, select: &SelectionSpec, mode: FeatureMode) -> Result<Self> {
        let selection = select.resolve(header)?;
        let n = selection.signal_len();
        if n < mode.min_signal_len() {
            return Err(Error::Selection(format!(
                "{mode} needs a signal of length >= {}, selection gives {n}",
                mode.min_signal_len()
            )));
        }
        let plan = match mode {
            FeatureMode::FftMax => Some(Dft::new(n)?),
            _ => None,
        };
        Ok(Self { header: header.clone(), selection, mode, plan })
    }

    pub fn selection(&self) -> &ResolvedSelection {
        &self.selection
    }

    pub fn feature(&self, record: &TraceRecord) -> Result<FeatureRecord> {
        let t = build_resolved(record, &self.header, &self.selection)?;
        let f = extract(self.mode, self.plan.as_ref(), &t)?;
        let values = f.values.iter().map(|&v| v as f32).collect::<Vec<_>>();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("record {:?}: feature overflows float32", record.id)));
        }
        Ok(FeatureRecord { id: record.id.clone(), label: record.label, values })
    }

    /// Featurizes a batch, splitting it across `threads` workers; output order equals input order.
    pub fn features(&self, records: &[TraceRecord], threads: usize) -> Result<Vec<FeatureRecord>> {
        let threads = threads.max(1).min(records.len().max(1));
        if threads == 1 {
            return records.iter().map(|r| self.feature(r)).collect();
        }
        let chunk = records.len().div_ceil(threads);
        std::thread::scope(|scope| {
            let handles: Vec<_> = records
                .chunks(chunk)
                .map(|part| scope.spawn(move || part.iter().map(|r| self.feature(r)).collect::<Result<Vec<_>>>()))
                .collect();
            let mut out = Vec::with_capacity(records.len());
            for h in handles {
                out.extend(h.join().expect("featurize worker panicked")?);
            }
            Ok(out)
        })
    }

    fn header_for(&self, count: usize, digest: String, opts: &FeaturizeOptions) -> FeatureHeader {
        FeatureHeader {
            dim: self.header.hidden_dim,
            count,
            mode: self.mode,
            nodes: self.selection.nodes.clone(),
            layers: self.selection.layers.clone(),
            signal_len: self.selection.signal_len(),
            source_digest: digest,
            obs_point: opts.obs_point,
            tau: opts.label_rule.map(|r| r.tau),
        }
    }
}

const BATCH: usize = 256;

/// Streams an HST1 source into an in-memory feature set.
pub fn featurize<R: Read>(
    source: R,
    select: &SelectionSpec,
    mode: FeatureMode,
    opts: &FeaturizeOptions,
) -> Result<FeatureSet> {
    let mut reader = TraceReader::new(HashingReader { inner: source, hasher: Sha256::new() })?;
    let featurizer = Featurizer::new(reader.header(), select, mode)?;

    let mut records = Vec::new();
    let mut batch = Vec::with_capacity(BATCH);
    let mut index = 0usize;
    let flush = |batch: &mut Vec<TraceRecord>, records: &mut Vec<FeatureRecord>| -> Result<()> {
        records.extend(featurizer.features(batch, opts.threads)?);
        batch.clear();
        Ok(())
    };
    while let Some(mut record) = reader.next_record()? {
        let i = index;
        index += 1;
        if opts.obs_point.is_some_and(|p| p != record.observation_point) {
            continue;
        }
        if let Some(rule) = opts.label_rule {
            let sim = record
                .sim_score
                .ok_or_else(|| Error::Data(format!("record {i} ({:?}) has no similarity score", record.id)))?;
            record.label = Some(label_for(sim, rule));
        }
        batch.push(record);
        if batch.len() == BATCH {
            flush(&mut batch, &mut records).map_err(|e| e.context("featurize"))?;
        }
    }
    flush(&mut batch, &mut records).map_err(|e| e.context("featurize"))?;
    if records.is_empty() {
        return Err(Error::Data(match opts.obs_point {
            Some(p) => format!("no records captured at {p}"),
            None => "trace file has no records".into(),
        }));
    }

    let digest = hex::encode(reader.into_inner().hasher.finalize());
    let header = featurizer.header_for(records.len(), digest, opts);
    Ok(FeatureSet { header, records })
}

/// Featurizes an HST1 source and writes HSF1. Nothing is written if any record fails.
pub fn featurize_file<R: Read, W: Write>(
    source: R,
    select: &SelectionSpec,
    mode: FeatureMode,
    opts: &FeaturizeOptions,
    sink: W,
) -> Result<usize> {
    let set = featurize(source, select, mode, opts)?;
    write_features(&set, sink)
}
