//! Cross-layer temporal signals.
//!
//! Rows of the signal matrix are time steps: ascending layer, and within a
//! layer the computation order ah → rh → mh → h restricted to the selected
//! nodes. Column `i` is the temporal signal of hidden dimension `i`.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{NodeTag, TraceHeader, TraceRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct SignalMatrix {
    /// Shape `[N][hidden_dim]`.
    pub data: Array2<f64>,
    /// One-based layer indices in time order.
    pub layer_ids: Vec<usize>,
    pub node_tags: Vec<NodeTag>,
}

impl SignalMatrix {
    pub fn signal_len(&self) -> usize {
        self.data.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.data.ncols()
    }
}

/// Which layers feed the signal.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerSelection {
    All,
    /// One-based, strictly increasing.
    Explicit(Vec<usize>),
    Random { k: usize, seed: u64 },
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSelection::All => f.write_str("all"),
            LayerSelection::Explicit(ids) => {
                let parts: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
                f.write_str(&parts.join(","))
            }
            LayerSelection::Random { k, seed } => write!(f, "random:{k}:seed={seed}"),
        }
    }
}

impl FromStr for LayerSelection {
    type Err = Error;

    /// Accepts `all`, `2,5,9`, `random:K` or `random:K:seed=S`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(LayerSelection::All);
        }
        let bad = |why: &str| Error::Selection(format!("layer selection {s:?}: {why}"));
        if let Some(rest) = s.strip_prefix("random:") {
            let mut parts = rest.split(':');
            let k = parts
                .next()
                .and_then(|k| k.parse::<usize>().ok())
                .ok_or_else(|| bad("expected random:K[:seed=S]"))?;
            let seed = match parts.next() {
                None => 0,
                Some(p) => p
                    .strip_prefix("seed=")
                    .and_then(|v| v.parse::<u64>().ok())
                    .ok_or_else(|| bad("expected seed=S"))?,
            };
            if parts.next().is_some() {
                return Err(bad("too many fields"));
            }
            return Ok(LayerSelection::Random { k, seed });
        }
        let ids = s
            .split(',')
            .map(|p| p.trim().parse::<usize>().map_err(|_| bad("expected comma-separated layer numbers")))
            .collect::<Result<Vec<_>>>()?;
        Ok(LayerSelection::Explicit(ids))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub layers: LayerSelection,
    pub nodes: Vec<NodeTag>,
}

impl Default for SelectionSpec {
    fn default() -> Self {
        Self { layers: LayerSelection::All, nodes: NodeTag::ALL.to_vec() }
    }
}

/// Parses `all` or a comma-separated node list such as `ah,h`.
pub fn parse_nodes(s: &str) -> Result<Vec<NodeTag>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(NodeTag::ALL.to_vec());
    }
    s.split(',').map(|p| p.parse::<NodeTag>().map_err(|e| Error::Selection(e.to_string()))).collect()
}

/// A selection bound to a concrete capture geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedSelection {
    /// One-based, ascending.
    pub layers: Vec<usize>,
    /// Computation order.
    pub nodes: Vec<NodeTag>,
    /// Index of each selected node in the capture's node order.
    node_slots: Vec<usize>,
}

impl ResolvedSelection {
    pub fn signal_len(&self) -> usize {
        self.layers.len() * self.nodes.len()
    }
}

/// Draws `k` distinct layers out of `1..=num_layers`, sorted ascending.
pub fn resolve_random_layers(num_layers: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > num_layers {
        return Err(Error::Selection(format!("cannot sample {k} of {num_layers} layers")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers: Vec<usize> = rand::seq::index::sample(&mut rng, num_layers, k)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    layers.sort_unstable();
    Ok(layers)
}

impl SelectionSpec {
    pub fn resolve(&self, header: &TraceHeader) -> Result<ResolvedSelection> {
        let l = header.num_layers;
        let layers = match &self.layers {
            LayerSelection::All => (1..=l).collect(),
            LayerSelection::Explicit(ids) => {
                if ids.is_empty() {
                    return Err(Error::Selection("empty layer list".into()));
                }
                if ids.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Selection(format!("layer list {ids:?} not strictly increasing")));
                }
                if let Some(&bad) = ids.iter().find(|&&i| i == 0 || i > l) {
                    return Err(Error::Selection(format!("layer {bad} outside [1, {l}]")));
                }
                ids.clone()
            }
            LayerSelection::Random { k, seed } => resolve_random_layers(l, *k, *seed)?,
        };

        if self.nodes.is_empty() {
            return Err(Error::Selection("empty node selection".into()));
        }
        let mut nodes = self.nodes.clone();
        nodes.sort_by_key(|n| n.rank());
        nodes.dedup();
        let node_slots = nodes
            .iter()
            .map(|&tag| {
                header
                    .node_index(tag)
                    .ok_or_else(|| Error::Selection(format!("node {tag} absent from capture")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedSelection { layers, nodes, node_slots })
    }
}

pub fn build_signal_matrix(
    record: &TraceRecord,
    header: &TraceHeader,
    select: &SelectionSpec,
) -> Result<SignalMatrix> {
    let resolved = select.resolve(header)?;
    build_resolved(record, header, &resolved)
}

/// Builds the matrix for an already-resolved selection, so a file's records share one resolution.
pub fn build_resolved(
    record: &TraceRecord,
    header: &TraceHeader,
    select: &ResolvedSelection,
) -> Result<SignalMatrix> {
    if record.values.len() != header.values_per_record() {
        return Err(Error::Shape(format!(
            "record {:?} holds {} values, header shape needs {}",
            record.id,
            record.values.len(),
            header.values_per_record()
        )));
    }
    let d = header.hidden_dim;
    let mut data = Array2::<f64>::zeros((select.signal_len(), d));
    let mut rows = data.rows_mut().into_iter();
    for &layer in &select.layers {
        for &slot in &select.node_slots {
            let start = ((layer - 1) * header.node_order.len() + slot) * d;
            let src = &record.values[start..start + d];
            let mut row = rows.next().expect("row count matches selection");
            for (dst, &v) in row.iter_mut().zip(src) {
                *dst = f64::from(v);
            }
        }
    }
    Ok(SignalMatrix { data, layer_ids: select.layers.clone(), node_tags: select.nodes.clone() })
}
