//! Hidden-state captures and the HST1 trace container.
//!
//! A trace record holds one generation's hidden states: for every layer, the
//! four per-layer node vectors (attention output, attention residual, MLP
//! output, layer output), each of width `hidden_dim`. Values are stored
//! layer-major, then node (in the header's `nodes` order), then dimension.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::binfmt::{self, CountingWriter};
use crate::error::{Error, Result};

pub const TRACE_MAGIC: &[u8; 4] = b"HST1";

/// One of the four per-layer capture points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeTag {
    /// Attention sublayer output.
    Ah,
    /// Residual stream after the attention add.
    Rh,
    /// MLP sublayer output.
    Mh,
    /// Layer output.
    H,
}

impl NodeTag {
    /// All nodes in computation order.
    pub const ALL: [NodeTag; 4] = [NodeTag::Ah, NodeTag::Rh, NodeTag::Mh, NodeTag::H];

    /// Position in computation order: ah=0, rh=1, mh=2, h=3.
    pub fn rank(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeTag::Ah => "ah",
            NodeTag::Rh => "rh",
            NodeTag::Mh => "mh",
            NodeTag::H => "h",
        }
    }
}

impl fmt::Display for NodeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ah" => Ok(NodeTag::Ah),
            "rh" => Ok(NodeTag::Rh),
            "mh" => Ok(NodeTag::Mh),
            "h" => Ok(NodeTag::H),
            other => Err(Error::Config(format!("unknown node tag {other:?}"))),
        }
    }
}

/// Token position whose forward pass was captured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObservationPoint {
    #[serde(rename = "Q_start")]
    QStart,
    #[serde(rename = "Q_mid")]
    QMid,
    #[serde(rename = "Q_end")]
    QEnd,
    #[serde(rename = "A_start")]
    AStart,
    #[serde(rename = "A_mid")]
    AMid,
    #[serde(rename = "A_end")]
    AEnd,
}

impl ObservationPoint {
    pub const ALL: [ObservationPoint; 6] = [
        ObservationPoint::QStart,
        ObservationPoint::QMid,
        ObservationPoint::QEnd,
        ObservationPoint::AStart,
        ObservationPoint::AMid,
        ObservationPoint::AEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ObservationPoint::QStart => "Q_start",
            ObservationPoint::QMid => "Q_mid",
            ObservationPoint::QEnd => "Q_end",
            ObservationPoint::AStart => "A_start",
            ObservationPoint::AMid => "A_mid",
            ObservationPoint::AEnd => "A_end",
        }
    }
}

impl Default for ObservationPoint {
    /// The final answer token sees the whole question and answer.
    fn default() -> Self {
        ObservationPoint::AEnd
    }
}

impl fmt::Display for ObservationPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObservationPoint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown observation point {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    #[serde(rename = "model")]
    pub model_name: String,
    #[serde(rename = "layers")]
    pub num_layers: usize,
    #[serde(rename = "dim")]
    pub hidden_dim: usize,
    #[serde(rename = "nodes")]
    pub node_order: Vec<NodeTag>,
    #[serde(rename = "count")]
    pub record_count: usize,
    #[serde(rename = "dataset")]
    pub dataset_name: String,
}

impl TraceHeader {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::Format(format!(
                "layers ({}) and dim ({}) must be positive",
                self.num_layers, self.hidden_dim
            )));
        }
        if self.node_order.is_empty() {
            return Err(Error::Format("node order is empty".into()));
        }
        let mut seen = [false; 4];
        for tag in &self.node_order {
            if std::mem::replace(&mut seen[tag.rank()], true) {
                return Err(Error::Format(format!("node {tag} listed twice")));
            }
        }
        Ok(())
    }

    /// Number of values in one record's tensor.
    pub fn values_per_record(&self) -> usize {
        self.num_layers * self.node_order.len() * self.hidden_dim
    }

    /// Position of `tag` in this capture's node order.
    pub fn node_index(&self, tag: NodeTag) -> Option<usize> {
        self.node_order.iter().position(|&t| t == tag)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub id: String,
    pub observation_point: ObservationPoint,
    /// Layer-major, then node, then dimension.
    pub values: Vec<f32>,
    pub sim_score: Option<f64>,
    pub label: Option<u8>,
    pub question: Option<String>,
    pub answer: Option<String>,
}

impl TraceRecord {
    pub fn new(id: impl Into<String>, observation_point: ObservationPoint, values: Vec<f32>) -> Self {
        Self {
            id: id.into(),
            observation_point,
            values,
            sim_score: None,
            label: None,
            question: None,
            answer: None,
        }
    }

    /// Value at (layer, node slot, dim), all zero-based; the node slot indexes the header's node order.
    pub fn value(&self, header: &TraceHeader, layer: usize, node_slot: usize, dim: usize) -> f32 {
        let nodes = header.node_order.len();
        self.values[(layer * nodes + node_slot) * header.hidden_dim + dim]
    }

    pub fn validate(&self, header: &TraceHeader) -> Result<()> {
        let expected = header.values_per_record();
        if self.values.len() != expected {
            return Err(Error::Format(format!(
                "record {:?} holds {} values, header shape needs {expected}",
                self.id,
                self.values.len()
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "record {:?} has a non-finite value at offset {pos}",
                self.id
            )));
        }
        if let Some(label) = self.label {
            if label > 1 {
                return Err(Error::Data(format!("record {:?} has label {label}", self.id)));
            }
        }
        if let Some(sim) = self.sim_score {
            if !sim.is_finite() {
                return Err(Error::Data(format!("record {:?} has sim {sim}", self.id)));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct RecordMeta {
    id: String,
    obs_point: ObservationPoint,
    sim: Option<f64>,
    label: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    question: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    answer: Option<String>,
}

/// Writes an HST1 file and returns the number of bytes emitted.
pub fn write_traces<W: Write>(header: &TraceHeader, records: &[TraceRecord], sink: W) -> Result<usize> {
    header.validate()?;
    if header.record_count != records.len() {
        return Err(Error::Format(format!(
            "header declares {} records, {} supplied",
            header.record_count,
            records.len()
        )));
    }
    for (i, r) in records.iter().enumerate() {
        r.validate(header).map_err(|e| e.context(format!("record {i}")))?;
    }

    let mut w = CountingWriter::new(sink);
    binfmt::write_preamble(&mut w, TRACE_MAGIC, header)?;
    for r in records {
        let meta = RecordMeta {
            id: r.id.clone(),
            obs_point: r.observation_point,
            sim: r.sim_score,
            label: r.label,
            question: r.question.clone(),
            answer: r.answer.clone(),
        };
        binfmt::write_json_block(&mut w, &meta)?;
        binfmt::write_f32s(&mut w, r.values.iter().copied())?;
    }
    w.flush()?;
    Ok(w.written)
}

/// Streaming HST1 reader yielding one record at a time.
pub struct TraceReader<R> {
    source: R,
    header: TraceHeader,
    next_index: usize,
}

impl<R: Read> TraceReader<R> {
    pub fn new(mut source: R) -> Result<Self> {
        let header: TraceHeader = binfmt::read_preamble(&mut source, TRACE_MAGIC)?;
        header.validate()?;
        Ok(Self { source, header, next_index: 0 })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn into_inner(self) -> R {
        self.source
    }

    fn read_record(&mut self) -> Result<TraceRecord> {
        let meta: RecordMeta = binfmt::read_json_block(&mut self.source, "record metadata")?;
        let values = binfmt::read_f32s(&mut self.source, self.header.values_per_record(), "tensor")?;
        let record = TraceRecord {
            id: meta.id,
            observation_point: meta.obs_point,
            values,
            sim_score: meta.sim,
            label: meta.label,
            question: meta.question,
            answer: meta.answer,
        };
        record.validate(&self.header)?;
        Ok(record)
    }

    /// Reads the next record, or `None` after the declared count. Trailing bytes are an error.
    pub fn next_record(&mut self) -> Result<Option<TraceRecord>> {
        if self.next_index == self.header.record_count {
            binfmt::expect_eof(&mut self.source)?;
            self.next_index += 1;
            return Ok(None);
        }
        if self.next_index > self.header.record_count {
            return Ok(None);
        }
        let index = self.next_index;
        self.next_index += 1;
        self.read_record().map(Some).map_err(|e| e.context(format!("record {index}")))
    }
}

impl<R: Read> Iterator for TraceReader<R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_record().transpose()
    }
}

pub fn read_traces<R: Read>(source: R) -> Result<(TraceHeader, Vec<TraceRecord>)> {
    let mut reader = TraceReader::new(source)?;
    let mut records = Vec::with_capacity(reader.header().record_count.min(1 << 16));
    while let Some(r) = reader.next_record()? {
        records.push(r);
    }
    Ok((reader.header, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(layers: usize, dim: usize, count: usize) -> TraceHeader {
        TraceHeader {
            model_name: "m".into(),
            num_layers: layers,
            hidden_dim: dim,
            node_order: NodeTag::ALL.to_vec(),
            record_count: count,
            dataset_name: "d".into(),
        }
    }

    #[test]
    fn zero_record_payload_is_32_zero_bytes() {
        let h = header(1, 2, 1);
        let rec = TraceRecord::new("r0", ObservationPoint::AEnd, vec![0.0; 8]);
        let mut buf = Vec::new();
        let n = write_traces(&h, std::slice::from_ref(&rec), &mut buf).unwrap();
        assert_eq!(n, buf.len());
        assert!(buf.ends_with(&[0u8; 32]));
        // the byte before the payload closes the metadata JSON
        assert_eq!(buf[buf.len() - 33], b'}');
    }

    #[test]
    fn llama_geometry_payload_size() {
        let h = header(32, 4096, 1);
        assert_eq!(h.values_per_record() * 4, 2_097_152);
    }

    #[test]
    fn layout_is_layer_then_node_then_dim() {
        let mut h = header(2, 3, 1);
        h.node_order = vec![NodeTag::H, NodeTag::Ah];
        let values: Vec<f32> = (0..12).map(|v| v as f32).collect();
        let rec = TraceRecord::new("x", ObservationPoint::AEnd, values);
        assert_eq!(rec.value(&h, 1, 0, 2), 8.0);
        assert_eq!(rec.value(&h, 0, 1, 1), 4.0);
    }

    #[test]
    fn bad_magic_is_unsupported() {
        let mut buf = Vec::new();
        write_traces(&header(1, 1, 0), &[], &mut buf).unwrap();
        buf[..4].copy_from_slice(b"XXXX");
        assert!(matches!(read_traces(&buf[..]), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn bad_version_is_unsupported() {
        let mut buf = Vec::new();
        write_traces(&header(1, 1, 0), &[], &mut buf).unwrap();
        buf[4] = 2;
        assert!(matches!(read_traces(&buf[..]), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn truncation_names_record_index() {
        let h = header(2, 4, 3);
        let recs: Vec<_> = (0..3)
            .map(|i| TraceRecord::new(format!("r{i}"), ObservationPoint::AEnd, vec![1.5; 32]))
            .collect();
        let mut buf = Vec::new();
        write_traces(&h, &recs, &mut buf).unwrap();
        buf.truncate(buf.len() - 10);
        match read_traces(&buf[..]) {
            Err(Error::Corruption(msg)) => assert!(msg.contains("record 2"), "{msg}"),
            other => panic!("expected corruption, got {other:?}"),
        }
    }

    #[test]
    fn trailing_bytes_are_corruption() {
        let mut buf = Vec::new();
        write_traces(&header(1, 1, 0), &[], &mut buf).unwrap();
        buf.push(0);
        assert!(matches!(read_traces(&buf[..]), Err(Error::Corruption(_))));
    }

    #[test]
    fn writer_rejects_shape_mismatch_and_nan() {
        let h = header(1, 2, 1);
        let short = TraceRecord::new("s", ObservationPoint::AEnd, vec![0.0; 7]);
        assert!(matches!(write_traces(&h, &[short], Vec::new()), Err(Error::Format(_))));
        let mut nan = TraceRecord::new("n", ObservationPoint::AEnd, vec![0.0; 8]);
        nan.values[3] = f32::NAN;
        assert!(matches!(write_traces(&h, &[nan], Vec::new()), Err(Error::Data(_))));
    }

    #[test]
    fn reader_rejects_injected_infinity() {
        let h = header(1, 1, 1);
        let rec = TraceRecord::new("r", ObservationPoint::AEnd, vec![2.0; 4]);
        let mut buf = Vec::new();
        write_traces(&h, &[rec], &mut buf).unwrap();
        let n = buf.len();
        buf[n - 4..].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(read_traces(&buf[..]), Err(Error::Data(_))));
    }

    #[test]
    fn duplicate_nodes_rejected() {
        let mut h = header(1, 1, 0);
        h.node_order = vec![NodeTag::Ah, NodeTag::Ah];
        assert!(write_traces(&h, &[], Vec::new()).is_err());
    }

    #[test]
    fn observation_point_names() {
        for p in ObservationPoint::ALL {
            assert_eq!(p.as_str().parse::<ObservationPoint>().unwrap(), p);
            assert_eq!(serde_json::to_string(&p).unwrap(), format!("\"{p}\""));
        }
    }
}
