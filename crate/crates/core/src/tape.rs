//! Minimal reverse-mode gradient engine over 2-D arrays.
//!
//! A forward pass pushes eagerly-evaluated nodes onto a [`Tape`]; the backward
//! walk visits nodes in reverse push order, so gradient accumulation order is
//! fixed and results are bitwise reproducible. The op set is exactly what the
//! denoiser and encoder need; shape misuse is a programming error and panics.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array2, Axis};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

/// Parameter handle. The `store` tag distinguishes parameters of different
/// stores (e.g. encoder vs denoiser) inside one tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId {
    store: u64,
    index: usize,
}

static NEXT_STORE_TAG: AtomicU64 = AtomicU64::new(1);

/// Named trainable tensors. Iteration order is insertion order, which fixes
/// checkpoint layout and optimizer update order.
#[derive(Debug)]
pub struct ParamStore {
    tag: u64,
    names: Vec<String>,
    tensors: Vec<Array2<f64>>,
    index: HashMap<String, usize>,
}

impl Clone for ParamStore {
    /// A clone keeps the same tag: it is the same logical parameter set
    /// (used when snapshotting a trainer), never mixed with its original in
    /// a single tape.
    fn clone(&self) -> Self {
        ParamStore {
            tag: self.tag,
            names: self.names.clone(),
            tensors: self.tensors.clone(),
            index: self.index.clone(),
        }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            tag: NEXT_STORE_TAG.fetch_add(1, Ordering::Relaxed),
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Array2<f64>) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name}"
        );
        let index = self.tensors.len();
        self.index.insert(name.to_string(), index);
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        ParamId { store: self.tag, index }
    }

    pub fn id(&self, name: &str) -> ParamId {
        let index = *self
            .index
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"));
        ParamId { store: self.tag, index }
    }

    pub fn param_id(&self, index: usize) -> ParamId {
        assert!(index < self.tensors.len());
        ParamId { store: self.tag, index }
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        assert_eq!(id.store, self.tag, "foreign ParamId");
        &self.tensors[id.index]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        assert_eq!(id.store, self.tag, "foreign ParamId");
        &mut self.tensors[id.index]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.names.iter().map(|n| n.as_str()).zip(self.tensors.iter())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(usize, usize),
    Add(usize, usize),
    /// Broadcast-add a 1×n bias to every row.
    AddRow(usize, usize),
    Scale(usize, f64),
    Silu(usize),
    SoftmaxRows(usize),
    Transpose(usize),
    ConcatRows(Vec<usize>),
    SliceRows {
        src: usize,
        start: usize,
        len: usize,
    },
    MeanRows(usize),
}

struct Node {
    op: Op,
    value: Array2<f64>,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    fn push(&mut self, op: Op, value: Array2<f64>) -> NodeId {
        self.nodes.push(Node { op, value });
        NodeId(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(Op::Leaf, value)
    }

    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        self.push(Op::Param(id), store.get(id).clone())
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.ncols(), vb.nrows(), "matmul inner dims");
        let value = va.dot(vb);
        self.push(Op::MatMul(a.0, b.0), value)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(va.dim(), vb.dim(), "add shapes");
        let value = va + vb;
        self.push(Op::Add(a.0, b.0), value)
    }

    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> NodeId {
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[bias.0].value);
        assert_eq!(vb.nrows(), 1, "bias must be a row vector");
        assert_eq!(va.ncols(), vb.ncols(), "bias width");
        let value = va + &vb.row(0);
        self.push(Op::AddRow(a.0, bias.0), value)
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|v| v * c);
        self.push(Op::Scale(a.0, c), value)
    }

    pub fn silu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x * sigmoid(x));
        self.push(Op::Silu(a.0), value)
    }

    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut value = self.nodes[a.0].value.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        self.push(Op::SoftmaxRows(a.0), value)
    }

    pub fn transpose(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.t().to_owned();
        self.push(Op::Transpose(a.0), value)
    }

    pub fn concat_rows(&mut self, pieces: &[NodeId]) -> NodeId {
        assert!(!pieces.is_empty());
        let cols = self.nodes[pieces[0].0].value.ncols();
        let rows: usize = pieces.iter().map(|p| self.nodes[p.0].value.nrows()).sum();
        let mut value = Array2::zeros((rows, cols));
        let mut at = 0;
        for p in pieces {
            let v = &self.nodes[p.0].value;
            assert_eq!(v.ncols(), cols, "concat_rows widths");
            value
                .slice_mut(ndarray::s![at..at + v.nrows(), ..])
                .assign(v);
            at += v.nrows();
        }
        self.push(Op::ConcatRows(pieces.iter().map(|p| p.0).collect()), value)
    }

    pub fn slice_rows(&mut self, src: NodeId, start: usize, len: usize) -> NodeId {
        let v = &self.nodes[src.0].value;
        assert!(start + len <= v.nrows(), "slice_rows out of range");
        let value = v.slice(ndarray::s![start..start + len, ..]).to_owned();
        self.push(Op::SliceRows { src: src.0, start, len }, value)
    }

    pub fn mean_rows(&mut self, a: NodeId) -> NodeId {
        let v = &self.nodes[a.0].value;
        let m = v.nrows() as f64;
        let value = v.sum_axis(Axis(0)).insert_axis(Axis(0)) / m;
        self.push(Op::MeanRows(a.0), value)
    }

    /// Reverse-mode sweep seeding `seed` at `output`. Returns per-node and
    /// per-parameter gradients; untouched entries are absent.
    pub fn backward(&self, output: NodeId, seed: Array2<f64>) -> BackwardPass {
        assert_eq!(seed.dim(), self.nodes[output.0].value.dim(), "seed shape");
        let mut node_grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        let mut param_grads: HashMap<ParamId, Array2<f64>> = HashMap::new();
        node_grads[output.0] = Some(seed);

        for i in (0..self.nodes.len()).rev() {
            let Some(g) = node_grads[i].take() else {
                continue;
            };
            match &self.nodes[i].op {
                Op::Leaf => {
                    node_grads[i] = Some(g);
                    continue;
                }
                Op::Param(pid) => {
                    match param_grads.get_mut(pid) {
                        Some(acc) => *acc += &g,
                        None => {
                            param_grads.insert(*pid, g.clone());
                        }
                    }
                    node_grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.nodes[*b].value.t());
                    let gb = self.nodes[*a].value.t().dot(&g);
                    accumulate(&mut node_grads[*a], &ga);
                    accumulate(&mut node_grads[*b], &gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut node_grads[*a], &g);
                    accumulate(&mut node_grads[*b], &g);
                }
                Op::AddRow(a, bias) => {
                    let gb = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut node_grads[*a], &g);
                    accumulate(&mut node_grads[*bias], &gb);
                }
                Op::Scale(a, c) => {
                    accumulate(&mut node_grads[*a], &g.mapv(|v| v * c));
                }
                Op::Silu(a) => {
                    let x = &self.nodes[*a].value;
                    let mut ga = g;
                    ndarray::Zip::from(&mut ga).and(x).for_each(|gv, &xv| {
                        let s = sigmoid(xv);
                        *gv *= s * (1.0 + xv * (1.0 - s));
                    });
                    accumulate(&mut node_grads[*a], &ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[i].value;
                    let mut ga = g;
                    for (mut grow, yrow) in ga.rows_mut().into_iter().zip(y.rows()) {
                        let dot: f64 = grow.iter().zip(yrow.iter()).map(|(a, b)| a * b).sum();
                        for (gv, &yv) in grow.iter_mut().zip(yrow.iter()) {
                            *gv = yv * (*gv - dot);
                        }
                    }
                    accumulate(&mut node_grads[*a], &ga);
                }
                Op::Transpose(a) => {
                    accumulate(&mut node_grads[*a], &g.t().to_owned());
                }
                Op::ConcatRows(pieces) => {
                    let mut at = 0;
                    for p in pieces {
                        let h = self.nodes[*p].value.nrows();
                        let gp = g.slice(ndarray::s![at..at + h, ..]).to_owned();
                        accumulate(&mut node_grads[*p], &gp);
                        at += h;
                    }
                }
                Op::SliceRows { src, start, len } => {
                    let full = &self.nodes[*src].value;
                    let mut gs = Array2::zeros(full.dim());
                    gs.slice_mut(ndarray::s![*start..*start + *len, ..]).assign(&g);
                    accumulate(&mut node_grads[*src], &gs);
                }
                Op::MeanRows(a) => {
                    let m = self.nodes[*a].value.nrows();
                    let scaled = g.mapv(|v| v / m as f64);
                    let ga = Array2::from_shape_fn(self.nodes[*a].value.dim(), |(_, c)| {
                        scaled[(0, c)]
                    });
                    accumulate(&mut node_grads[*a], &ga);
                }
            }
        }

        BackwardPass {
            node_grads,
            param_grads,
        }
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: &Array2<f64>) {
    match slot {
        Some(acc) => *acc += g,
        None => *slot = Some(g.clone()),
    }
}

pub struct BackwardPass {
    node_grads: Vec<Option<Array2<f64>>>,
    param_grads: HashMap<ParamId, Array2<f64>>,
}

impl BackwardPass {
    pub fn node_grad(&self, id: NodeId) -> Option<&Array2<f64>> {
        self.node_grads[id.0].as_ref()
    }

    pub fn param_grad(&self, id: ParamId) -> Option<&Array2<f64>> {
        self.param_grads.get(&id)
    }

    /// Dense per-tensor gradients for one store, zeros where no gradient
    /// flowed, aligned with the store's insertion order.
    pub fn param_grads_for(&self, store: &ParamStore) -> Vec<Array2<f64>> {
        (0..store.len())
            .map(|i| {
                let id = store.param_id(i);
                self.param_grads
                    .get(&id)
                    .cloned()
                    .unwrap_or_else(|| Array2::zeros(store.get(id).dim()))
            })
            .collect()
    }
}
