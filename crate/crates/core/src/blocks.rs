//! Shared building blocks for the denoiser and the feature encoder: residual
//! MLP sublayers and single-head self-attention applied independently to
//! fixed-size row groups of a stacked batch matrix.

use ndarray::Array2;

use crate::rng::{uniform_matrix, NoiseSource};
use crate::tape::{NodeId, ParamId, ParamStore, Tape};

pub(crate) struct AttentionWeights {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub wo: ParamId,
}

pub(crate) struct MlpWeights {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

/// Fan-in scaled-uniform init: U(−1/√fan_in, 1/√fan_in). Weights are stored
/// in (in × out) layout so the forward pass is a plain right-multiplication.
pub(crate) fn init_linear(
    store: &mut ParamStore,
    rng: &mut NoiseSource,
    name: &str,
    fan_in: usize,
    fan_out: usize,
) -> ParamId {
    let bound = 1.0 / (fan_in as f64).sqrt();
    store.insert(name, uniform_matrix(rng, fan_in, fan_out, bound))
}

pub(crate) fn init_attention(
    store: &mut ParamStore,
    rng: &mut NoiseSource,
    prefix: &str,
    width: usize,
) -> AttentionWeights {
    AttentionWeights {
        wq: init_linear(store, rng, &format!("{prefix}.wq"), width, width),
        wk: init_linear(store, rng, &format!("{prefix}.wk"), width, width),
        wv: init_linear(store, rng, &format!("{prefix}.wv"), width, width),
        wo: init_linear(store, rng, &format!("{prefix}.wo"), width, width),
    }
}

pub(crate) fn init_mlp(
    store: &mut ParamStore,
    rng: &mut NoiseSource,
    prefix: &str,
    width: usize,
    inner: usize,
) -> MlpWeights {
    MlpWeights {
        w1: init_linear(store, rng, &format!("{prefix}.w1"), width, inner),
        b1: store.insert(&format!("{prefix}.b1"), Array2::zeros((1, inner))),
        w2: init_linear(store, rng, &format!("{prefix}.w2"), inner, width),
        b2: store.insert(&format!("{prefix}.b2"), Array2::zeros((1, width))),
    }
}

pub(crate) fn lookup_attention(store: &ParamStore, prefix: &str) -> AttentionWeights {
    AttentionWeights {
        wq: store.id(&format!("{prefix}.wq")),
        wk: store.id(&format!("{prefix}.wk")),
        wv: store.id(&format!("{prefix}.wv")),
        wo: store.id(&format!("{prefix}.wo")),
    }
}

pub(crate) fn lookup_mlp(store: &ParamStore, prefix: &str) -> MlpWeights {
    MlpWeights {
        w1: store.id(&format!("{prefix}.w1")),
        b1: store.id(&format!("{prefix}.b1")),
        w2: store.id(&format!("{prefix}.w2")),
        b2: store.id(&format!("{prefix}.b2")),
    }
}

/// Residual self-attention over `groups` independent blocks of `rows`
/// consecutive rows each. Rows in different groups never interact.
pub(crate) fn group_attention(
    tape: &mut Tape,
    store: &ParamStore,
    stack: NodeId,
    groups: usize,
    rows: usize,
    w: &AttentionWeights,
) -> NodeId {
    let width = tape.value(stack).ncols();
    let scale = 1.0 / (width as f64).sqrt();
    let wq = tape.param(store, w.wq);
    let wk = tape.param(store, w.wk);
    let wv = tape.param(store, w.wv);
    let wo = tape.param(store, w.wo);
    let q = tape.matmul(stack, wq);
    let k = tape.matmul(stack, wk);
    let v = tape.matmul(stack, wv);

    let mut pieces = Vec::with_capacity(groups);
    for g in 0..groups {
        let at = g * rows;
        let qg = tape.slice_rows(q, at, rows);
        let kg = tape.slice_rows(k, at, rows);
        let vg = tape.slice_rows(v, at, rows);
        let kt = tape.transpose(kg);
        let scores = tape.matmul(qg, kt);
        let scores = tape.scale(scores, scale);
        let attn = tape.softmax_rows(scores);
        pieces.push(tape.matmul(attn, vg));
    }
    let gathered = tape.concat_rows(&pieces);
    let projected = tape.matmul(gathered, wo);
    tape.add(stack, projected)
}

/// Residual two-layer MLP with a smooth (silu) nonlinearity, applied rowwise.
pub(crate) fn mlp_residual(
    tape: &mut Tape,
    store: &ParamStore,
    stack: NodeId,
    w: &MlpWeights,
) -> NodeId {
    let w1 = tape.param(store, w.w1);
    let b1 = tape.param(store, w.b1);
    let w2 = tape.param(store, w.w2);
    let b2 = tape.param(store, w.b2);
    let u = tape.matmul(stack, w1);
    let u = tape.add_row(u, b1);
    let u = tape.silu(u);
    let u = tape.matmul(u, w2);
    let u = tape.add_row(u, b2);
    tape.add(stack, u)
}
