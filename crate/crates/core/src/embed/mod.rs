//! Attribute encoding and the heterogeneous graph embedding network.
//!
//! Node attributes become a fixed binary layout: node-type and category
//! one-hots, an opcode one-hot, a data-kind one-hot and a 256-bit payload.
//! The network runs per-relation message passing with shared weights, sum
//! pooling and an L2-normalized output, so cosine similarity of two
//! embeddings is their dot product.

pub mod train;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::opcode::StableCategory;
use crate::rng::sub_rng;
use crate::ssg::{DataNodeKind, Relation, SinkKind, SourceKind, Ssg};

pub const SEG_NODE_TYPE: usize = 0;
pub const SEG_CATEGORY: usize = 2;
pub const SEG_OPCODE: usize = 6;
pub const SEG_DATA_KIND: usize = 262;
pub const SEG_PAYLOAD: usize = 271;
/// Input feature width: 2 + 4 + 256 + 9 + 256.
pub const D_IN: usize = 527;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeFeature {
    /// Sorted indices of the set bits.
    pub bits: Vec<u16>,
}

impl NodeFeature {
    pub fn dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; D_IN];
        for &b in &self.bits {
            v[b as usize] = 1.0;
        }
        v
    }
}

/// Crops or pads arbitrary binary data to the 256-bit payload format:
/// longer inputs keep their first 32 bytes, shorter ones are left-padded so
/// small values land in the low-order bits.
pub fn fit_payload(bytes: &[u8]) -> [u8; 32] {
    let mut w = [0u8; 32];
    if bytes.len() >= 32 {
        w.copy_from_slice(&bytes[..32]);
    } else {
        w[32 - bytes.len()..].copy_from_slice(bytes);
    }
    w
}

fn category_index(c: StableCategory) -> usize {
    match c {
        StableCategory::Storage => 0,
        StableCategory::Log => 1,
        StableCategory::Call => 2,
        StableCategory::Return => 3,
    }
}

fn data_kind_index(kind: &DataNodeKind) -> usize {
    match kind {
        DataNodeKind::Source(SourceKind::Constant { .. }) => 0,
        DataNodeKind::Source(SourceKind::Information { .. }) => 1,
        DataNodeKind::Source(SourceKind::Calldata { .. }) => 2,
        DataNodeKind::Source(SourceKind::ReturnData { .. }) => 3,
        DataNodeKind::Source(SourceKind::Definition { .. }) => 4,
        DataNodeKind::Sink { kind, .. } => match kind {
            SinkKind::LogTopic { .. } | SinkKind::LogData { .. } => 5,
            SinkKind::StorageSlot { .. } | SinkKind::StorageValue { .. } => 6,
            SinkKind::Call { .. } => 7,
            SinkKind::Return { .. } => 8,
        },
    }
}

/// Attribute opcode carried in the opcode one-hot segment, for data nodes
/// whose Table attribute is an opcode.
fn data_opcode(kind: &DataNodeKind) -> Option<u8> {
    match kind {
        DataNodeKind::Source(SourceKind::Information { opcode }) => Some(*opcode),
        DataNodeKind::Source(SourceKind::Definition { opcode, .. }) => *opcode,
        _ => None,
    }
}

/// Sinks pack a role discriminator into the payload's top byte and the
/// value or index into the remaining 248 bits; sources use the full word.
fn payload_word(kind: &DataNodeKind) -> Option<[u8; 32]> {
    let sink = |role: u8, tail: &[u8]| {
        let mut w = [0u8; 32];
        w[0] = role;
        let n = tail.len().min(31);
        w[32 - n..].copy_from_slice(&tail[tail.len() - n..]);
        Some(w)
    };
    match kind {
        DataNodeKind::Source(SourceKind::Constant { value }) => Some(value.0),
        DataNodeKind::Source(SourceKind::Calldata { offset }) => offset.map(|w| w.0),
        DataNodeKind::Source(SourceKind::ReturnData { offset, .. }) => offset.map(|w| w.0),
        DataNodeKind::Source(_) => None,
        DataNodeKind::Sink { kind, .. } => match kind {
            SinkKind::LogTopic { topic_index } => sink(1, &topic_index.to_be_bytes()),
            SinkKind::LogData { index } => sink(2, &index.to_be_bytes()),
            SinkKind::StorageSlot { slot } => {
                sink(1, &slot.map(|w| w.0).unwrap_or([0u8; 32])[1..])
            }
            SinkKind::StorageValue { slot } => {
                sink(2, &slot.map(|w| w.0).unwrap_or([0u8; 32])[1..])
            }
            SinkKind::Call { role, index } => {
                let code = match role {
                    crate::ssg::CallRole::Address => 1,
                    crate::ssg::CallRole::Value => 2,
                    crate::ssg::CallRole::Selector => 3,
                    crate::ssg::CallRole::Arg => 4,
                };
                sink(code, &index.to_be_bytes())
            }
            SinkKind::Return { index } => sink(1, &index.to_be_bytes()),
        },
    }
}

/// Feature of one control node.
pub fn encode_control(category: StableCategory, opcode: u8) -> NodeFeature {
    let bits = vec![
        SEG_NODE_TYPE as u16,
        (SEG_CATEGORY + category_index(category)) as u16,
        (SEG_OPCODE + opcode as usize) as u16,
    ];
    NodeFeature { bits }
}

/// Feature of one data node.
pub fn encode_data(kind: &DataNodeKind) -> NodeFeature {
    let mut bits = vec![
        (SEG_NODE_TYPE + 1) as u16,
        (SEG_DATA_KIND + data_kind_index(kind)) as u16,
    ];
    if let Some(op) = data_opcode(kind) {
        bits.push((SEG_OPCODE + op as usize) as u16);
    }
    if let Some(word) = payload_word(kind) {
        for (i, byte) in word.iter().enumerate() {
            for j in 0..8 {
                if byte & (0x80 >> j) != 0 {
                    bits.push((SEG_PAYLOAD + i * 8 + j) as u16);
                }
            }
        }
    }
    bits.sort_unstable();
    NodeFeature { bits }
}

/// An SSG reduced to what the network consumes, in canonical node order:
/// control nodes by (offset, block), then data nodes by kind. Isomorphic
/// graphs under node-id permutation prepare to identical structures.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub n: usize,
    pub feats: Vec<NodeFeature>,
    /// (from, to) per relation, sorted.
    pub edges: [Vec<(u32, u32)>; 3],
}

pub fn prepare(ssg: &Ssg) -> PreparedGraph {
    let n_c = ssg.control_nodes.len();
    let mut control_order: Vec<usize> = (0..n_c).collect();
    control_order.sort_by_key(|&i| {
        let c = &ssg.control_nodes[i];
        (c.site.offset, c.site.block, c.opcode)
    });
    let mut control_remap = vec![0usize; n_c];
    for (new_id, &old_pos) in control_order.iter().enumerate() {
        control_remap[old_pos] = new_id;
    }

    // sink order must follow the canonical id of the owning control node
    let sort_key = |kind: &DataNodeKind| match kind {
        DataNodeKind::Source(s) => (0usize, 0usize, Some(s.clone()), None),
        DataNodeKind::Sink { control, kind } => {
            (1usize, control_remap[*control], None, Some(kind.clone()))
        }
    };
    let mut data_order: Vec<usize> = (0..ssg.data_nodes.len()).collect();
    data_order.sort_by(|&a, &b| {
        sort_key(&ssg.data_nodes[a].kind).cmp(&sort_key(&ssg.data_nodes[b].kind))
    });
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    for (new_id, &old_pos) in control_order.iter().enumerate() {
        remap.insert(ssg.control_nodes[old_pos].id, new_id);
    }
    for (i, &old_pos) in data_order.iter().enumerate() {
        remap.insert(ssg.data_nodes[old_pos].id, n_c + i);
    }

    let mut feats = Vec::with_capacity(ssg.node_count());
    for &i in &control_order {
        let c = &ssg.control_nodes[i];
        feats.push(encode_control(c.category, c.opcode));
    }
    for &i in &data_order {
        feats.push(encode_data(&ssg.data_nodes[i].kind));
    }

    let mut edges: [Vec<(u32, u32)>; 3] = [vec![], vec![], vec![]];
    for e in &ssg.edges {
        let slot = match e.rel {
            Relation::Cc => 0,
            Relation::Dd => 1,
            Relation::Cd => 2,
        };
        edges[slot].push((remap[&e.from] as u32, remap[&e.to] as u32));
    }
    for rel in edges.iter_mut() {
        rel.sort_unstable();
        rel.dedup();
    }

    PreparedGraph { n: ssg.node_count(), feats, edges }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub a: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Mat {
        Mat { rows, cols, a: vec![0.0; rows * cols] }
    }

    fn uniform(rows: usize, cols: usize, scale: f64, rng: &mut impl rand::Rng) -> Mat {
        let a = (0..rows * cols).map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale).collect();
        Mat { rows, cols, a }
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.a[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for (w, xv) in row.iter().zip(x) {
                acc += w * xv;
            }
            *o = acc;
        }
    }

    /// out += self^T · y
    pub fn tmatvec_add(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, yv) in y.iter().enumerate() {
            let row = &self.a[r * self.cols..(r + 1) * self.cols];
            for (o, w) in out.iter_mut().zip(row) {
                *o += yv * w;
            }
        }
    }

    /// self += y ⊗ x
    pub fn add_outer(&mut self, y: &[f64], x: &[f64]) {
        debug_assert_eq!(y.len(), self.rows);
        debug_assert_eq!(x.len(), self.cols);
        for (r, yv) in y.iter().enumerate() {
            let row = &mut self.a[r * self.cols..(r + 1) * self.cols];
            for (w, xv) in row.iter_mut().zip(x) {
                *w += yv * xv;
            }
        }
    }

    /// Sum of the columns selected by the set bits of a sparse binary input.
    pub fn col_sum(&self, bits: &[u16], out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.rows);
        out.fill(0.0);
        for r in 0..self.rows {
            let row = &self.a[r * self.cols..(r + 1) * self.cols];
            let mut acc = 0.0;
            for &b in bits {
                acc += row[b as usize];
            }
            out[r] = acc;
        }
    }

    /// self[:, b] += y for every set bit b.
    pub fn add_cols(&mut self, bits: &[u16], y: &[f64]) {
        for (r, yv) in y.iter().enumerate() {
            let row = &mut self.a[r * self.cols..(r + 1) * self.cols];
            for &b in bits {
                row[b as usize] += yv;
            }
        }
    }
}

/// The embedding network parameters. One weight matrix per edge relation,
/// shared across both Siamese towers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub format: String,
    pub version: u32,
    pub p: usize,
    pub depth: usize,
    pub d_in: usize,
    pub seed: u64,
    pub w_in: Mat,
    pub w_cc: Mat,
    pub w_dd: Mat,
    pub w_cd: Mat,
    pub w_out: Mat,
}

pub const MODEL_FORMAT: &str = "esim-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum EmbedError {
    EmptyBatch,
    DivergedLoss { epoch: usize, loss: f64 },
    DimensionMismatch { expected: usize, got: usize },
    BadModel(String),
}

impl fmt::Display for EmbedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EmbedError::EmptyBatch => write!(f, "empty training batch"),
            EmbedError::DivergedLoss { epoch, loss } => {
                write!(f, "loss diverged at epoch {epoch}: {loss}")
            }
            EmbedError::DimensionMismatch { expected, got } => {
                write!(f, "vector size {got}, model expects {expected}")
            }
            EmbedError::BadModel(msg) => write!(f, "bad model file: {msg}"),
        }
    }
}

impl std::error::Error for EmbedError {}

impl EmbeddingModel {
    pub fn init(p: usize, depth: usize, seed: u64) -> EmbeddingModel {
        let mut rng = sub_rng(seed, "init");
        let scale = 1.0 / (p as f64).sqrt();
        EmbeddingModel {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            p,
            depth,
            d_in: D_IN,
            seed,
            w_in: Mat::uniform(p, D_IN, scale, &mut rng),
            w_cc: Mat::uniform(p, p, scale, &mut rng),
            w_dd: Mat::uniform(p, p, scale, &mut rng),
            w_cd: Mat::uniform(p, p, scale, &mut rng),
            w_out: Mat::uniform(p, p, scale, &mut rng),
        }
    }

    pub fn mats(&self) -> [&Mat; 5] {
        [&self.w_in, &self.w_cc, &self.w_dd, &self.w_cd, &self.w_out]
    }

    pub fn mats_mut(&mut self) -> [&mut Mat; 5] {
        [&mut self.w_in, &mut self.w_cc, &mut self.w_dd, &mut self.w_cd, &mut self.w_out]
    }

    pub fn n_params(&self) -> usize {
        self.mats().iter().map(|m| m.a.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        for m in self.mats() {
            v.extend_from_slice(&m.a);
        }
        v
    }

    pub fn assign_flat(&mut self, flat: &[f64]) {
        let mut pos = 0;
        for m in self.mats_mut() {
            let len = m.a.len();
            m.a.copy_from_slice(&flat[pos..pos + len]);
            pos += len;
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<EmbeddingModel, EmbedError> {
        let m: EmbeddingModel =
            serde_json::from_str(text).map_err(|e| EmbedError::BadModel(e.to_string()))?;
        if m.format != MODEL_FORMAT {
            return Err(EmbedError::BadModel(format!("format {:?}", m.format)));
        }
        if m.version != MODEL_VERSION {
            return Err(EmbedError::BadModel(format!("version {}", m.version)));
        }
        let shapes_ok = m.w_in.rows == m.p
            && m.w_in.cols == m.d_in
            && m.d_in == D_IN
            && [&m.w_cc, &m.w_dd, &m.w_cd, &m.w_out]
                .iter()
                .all(|w| w.rows == m.p && w.cols == m.p)
            && m.mats().iter().all(|w| w.a.len() == w.rows * w.cols);
        if !shapes_ok {
            return Err(EmbedError::BadModel("matrix shapes inconsistent".into()));
        }
        if m.mats().iter().any(|w| w.a.iter().any(|x| !x.is_finite())) {
            return Err(EmbedError::BadModel("non-finite parameter".into()));
        }
        Ok(m)
    }
}

fn tanh_vec(v: &mut [f64]) {
    for x in v.iter_mut() {
        *x = x.tanh();
    }
}

pub(crate) struct ForwardCache {
    /// h[t][v]: node states per layer, h[0] after the input projection.
    h: Vec<Vec<Vec<f64>>>,
    /// msgs[t][r][v]: aggregated incoming messages used at layer t+1.
    msgs: Vec<[Vec<Vec<f64>>; 3]>,
    s: Vec<f64>,
    pub mu: Vec<f64>,
    norm: f64,
}

pub(crate) fn forward(g: &PreparedGraph, m: &EmbeddingModel) -> ForwardCache {
    let p = m.p;
    if g.n == 0 {
        return ForwardCache {
            h: vec![],
            msgs: vec![],
            s: vec![0.0; p],
            mu: vec![0.0; p],
            norm: 0.0,
        };
    }
    let mut h0 = Vec::with_capacity(g.n);
    for f in &g.feats {
        let mut v = vec![0.0; p];
        m.w_in.col_sum(&f.bits, &mut v);
        tanh_vec(&mut v);
        h0.push(v);
    }
    let mut h = vec![h0];
    let mut msgs = Vec::with_capacity(m.depth);
    let rel_mats = [&m.w_cc, &m.w_dd, &m.w_cd];
    for t in 0..m.depth {
        let prev = &h[t];
        let mut layer_msgs: [Vec<Vec<f64>>; 3] = [
            vec![vec![0.0; p]; g.n],
            vec![vec![0.0; p]; g.n],
            vec![vec![0.0; p]; g.n],
        ];
        for (r, rel_edges) in g.edges.iter().enumerate() {
            for &(u, v) in rel_edges {
                for (acc, x) in layer_msgs[r][v as usize].iter_mut().zip(&prev[u as usize]) {
                    *acc += x;
                }
            }
        }
        let mut next = Vec::with_capacity(g.n);
        let mut tmp = vec![0.0; p];
        for v in 0..g.n {
            let mut acc = prev[v].clone();
            for (r, w) in rel_mats.iter().enumerate() {
                w.matvec(&layer_msgs[r][v], &mut tmp);
                for (a, x) in acc.iter_mut().zip(&tmp) {
                    *a += x;
                }
            }
            tanh_vec(&mut acc);
            next.push(acc);
        }
        msgs.push(layer_msgs);
        h.push(next);
    }
    let mut s = vec![0.0; p];
    for v in h.last().unwrap() {
        for (a, x) in s.iter_mut().zip(v) {
            *a += x;
        }
    }
    let mut z = vec![0.0; p];
    m.w_out.matvec(&s, &mut z);
    let norm = z.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mu = if norm > 0.0 { z.iter().map(|x| x / norm).collect() } else { vec![0.0; p] };
    ForwardCache { h, msgs, s, mu, norm }
}

/// Gradient accumulator with the model's shapes.
pub(crate) struct ModelGrads {
    pub w_in: Mat,
    pub w_cc: Mat,
    pub w_dd: Mat,
    pub w_cd: Mat,
    pub w_out: Mat,
}

impl ModelGrads {
    pub fn zeros(m: &EmbeddingModel) -> ModelGrads {
        ModelGrads {
            w_in: Mat::zeros(m.p, m.d_in),
            w_cc: Mat::zeros(m.p, m.p),
            w_dd: Mat::zeros(m.p, m.p),
            w_cd: Mat::zeros(m.p, m.p),
            w_out: Mat::zeros(m.p, m.p),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mats = [&self.w_in, &self.w_cc, &self.w_dd, &self.w_cd, &self.w_out];
        let mut v = Vec::with_capacity(mats.iter().map(|m| m.a.len()).sum());
        for m in mats {
            v.extend_from_slice(&m.a);
        }
        v
    }
}

/// Backpropagates d_mu (gradient at the normalized output) into the
/// parameter gradients.
pub(crate) fn backward(
    g: &PreparedGraph,
    m: &EmbeddingModel,
    cache: &ForwardCache,
    d_mu: &[f64],
    grads: &mut ModelGrads,
) {
    let p = m.p;
    if g.n == 0 || cache.norm == 0.0 {
        return;
    }
    // through normalization: dz = (d_mu - mu (mu . d_mu)) / norm
    let mu_dot: f64 = cache.mu.iter().zip(d_mu).map(|(a, b)| a * b).sum();
    let dz: Vec<f64> =
        d_mu.iter().zip(&cache.mu).map(|(g_i, mu_i)| (g_i - mu_i * mu_dot) / cache.norm).collect();
    grads.w_out.add_outer(&dz, &cache.s);
    let mut ds = vec![0.0; p];
    m.w_out.tmatvec_add(&dz, &mut ds);

    // sum pooling fans ds out to every node of the last layer
    let mut dh: Vec<Vec<f64>> = vec![ds; g.n];
    let rel_mats = [&m.w_cc, &m.w_dd, &m.w_cd];
    fn rel_grads(grads: &mut ModelGrads, r: usize) -> &mut Mat {
        match r {
            0 => &mut grads.w_cc,
            1 => &mut grads.w_dd,
            _ => &mut grads.w_cd,
        }
    }
    for t in (0..m.depth).rev() {
        let out_h = &cache.h[t + 1];
        let mut da = vec![vec![0.0; p]; g.n];
        for v in 0..g.n {
            for i in 0..p {
                da[v][i] = dh[v][i] * (1.0 - out_h[v][i] * out_h[v][i]);
            }
        }
        let mut dh_prev = da.clone(); // the residual/self term
        for (r, rel_edges) in g.edges.iter().enumerate() {
            let msgs = &cache.msgs[t][r];
            let gw = rel_grads(grads, r);
            let mut has_in = vec![false; g.n];
            for &(_, v) in rel_edges {
                has_in[v as usize] = true;
            }
            // dmsg = W_r^T da, only where messages arrived
            let mut dmsg = vec![vec![0.0; p]; g.n];
            for v in 0..g.n {
                if has_in[v] {
                    gw.add_outer(&da[v], &msgs[v]);
                    rel_mats[r].tmatvec_add(&da[v], &mut dmsg[v]);
                }
            }
            for &(u, v) in rel_edges {
                for (acc, x) in dh_prev[u as usize].iter_mut().zip(&dmsg[v as usize]) {
                    *acc += x;
                }
            }
        }
        dh = dh_prev;
    }
    // input projection
    for v in 0..g.n {
        let h0 = &cache.h[0][v];
        let db: Vec<f64> =
            dh[v].iter().zip(h0).map(|(g_i, h_i)| g_i * (1.0 - h_i * h_i)).collect();
        grads.w_in.add_cols(&g.feats[v].bits, &db);
    }
}

/// Graph embedding: zero for the empty graph, unit length otherwise.
pub fn embed_prepared(g: &PreparedGraph, m: &EmbeddingModel) -> Vec<f64> {
    forward(g, m).mu
}

pub fn embed_ssg(ssg: &Ssg, m: &EmbeddingModel) -> Vec<f64> {
    embed_prepared(&prepare(ssg), m)
}

/// Cosine similarity; zero vectors compare as 0.
pub fn similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// The Siamese loss over similarity scores with ±1 labels. A batch missing
/// one label class drops that mean term.
pub fn siamese_loss_from_sims(sims: &[(f64, i8)]) -> Result<f64, EmbedError> {
    if sims.is_empty() {
        return Err(EmbedError::EmptyBatch);
    }
    let pos: Vec<f64> = sims.iter().filter(|(_, y)| *y > 0).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = sims.iter().filter(|(_, y)| *y < 0).map(|(s, _)| *s).collect();
    let mut loss = 0.0;
    if !pos.is_empty() {
        loss -= pos.iter().sum::<f64>() / pos.len() as f64;
    }
    if !neg.is_empty() {
        loss -= neg.iter().map(|s| 1.0 - s).sum::<f64>() / neg.len() as f64;
    }
    Ok(loss)
}

/// Embeds both sides of every pair and applies the loss.
pub fn siamese_loss(m: &EmbeddingModel, pairs: &[(&Ssg, &Ssg, i8)]) -> Result<f64, EmbedError> {
    let sims: Vec<(f64, i8)> = pairs
        .iter()
        .map(|(a, b, y)| (similarity(&embed_ssg(a, m), &embed_ssg(b, m)), *y))
        .collect();
    siamese_loss_from_sims(&sims)
}

/// Header for the embedding CSV export.
pub fn embedding_csv_header(p: usize) -> String {
    let mut s = String::from("origin_id,selector");
    for i in 0..p {
        s.push_str(&format!(",v{i}"));
    }
    s
}

/// One CSV row: origin, selector, then the vector components.
pub fn embedding_csv_row(origin_id: &str, selector: &str, v: &[f64]) -> String {
    let mut s = format!("{origin_id},{selector}");
    for x in v {
        s.push_str(&format!(",{x}"));
    }
    s
}
