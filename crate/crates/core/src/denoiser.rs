//! The conditional denoising network f(y_t, t, c) → class logits.
//!
//! Body: input projection of the noisy label, sinusoidal time embedding and
//! condition each passed through a linear projection, then residual MLP
//! blocks. For multi-token inputs the projected condition is prepended to the
//! token rows and every block starts with self-attention over
//! [condition; tokens], so all token positions are denoised in one pass.
//!
//! Forward passes build a [`Tape`]; gradients come from the tape's reverse
//! sweep and are exact for the scalar ⟨grad_logits, logits⟩.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::blocks::{
    group_attention, init_attention, init_linear, init_mlp, lookup_attention, lookup_mlp,
    mlp_residual,
};
use crate::error::{Error, Result};
use crate::rng::NoiseSource;
use crate::tape::{NodeId, ParamId, ParamStore, Tape};

/// MLP inner width as a multiple of `hidden_dim`.
const MLP_EXPANSION: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DenoiserSpec {
    /// Number of classes K (vocabulary size for sequences).
    pub classes: usize,
    /// Conditioning vector width.
    pub cond_dim: usize,
    /// Residual stream width.
    pub hidden_dim: usize,
    /// Number of residual blocks.
    pub depth: usize,
    /// Sinusoidal time-embedding width; must be even.
    pub time_embed_dim: usize,
    /// Tokens per instance; 1 for single-token tasks.
    pub seq_len: usize,
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.classes,
            self.cond_dim,
            self.hidden_dim,
            self.depth,
            self.time_embed_dim,
            self.seq_len,
        ];
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(
                "denoiser spec dimensions must all be >= 1".into(),
            ));
        }
        if self.time_embed_dim % 2 != 0 {
            return Err(Error::InvalidArgument(
                "time_embed_dim must be even".into(),
            ));
        }
        Ok(())
    }

    /// Closed-form total parameter count for this shape.
    pub fn param_count(&self) -> usize {
        let (k, c, h, te) = (self.classes, self.cond_dim, self.hidden_dim, self.time_embed_dim);
        let f = MLP_EXPANSION * h;
        let mut n = k * h + h; // input projection
        n += te * h + h; // time projection
        n += c * h + h; // condition projection
        let attn = if self.seq_len > 1 { 4 * h * h } else { 0 };
        n += self.depth * (attn + h * f + f + f * h + h);
        n += h * k + k; // head
        n += c; // null condition
        n
    }
}

/// Sinusoidal embedding: sin(t·ω_i) then cos(t·ω_i) over dim/2 geometric
/// frequencies spanning [1, 1/10000].
pub fn time_embedding(t: usize, dim: usize) -> Result<Array1<f64>> {
    if dim == 0 || dim % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "time embedding dim {dim} must be even and positive"
        )));
    }
    let half = dim / 2;
    let mut out = Array1::zeros(dim);
    for i in 0..half {
        let omega = if half == 1 {
            1.0
        } else {
            10000f64.powf(-(i as f64) / (half - 1) as f64)
        };
        let arg = t as f64 * omega;
        out[i] = arg.sin();
        out[half + i] = arg.cos();
    }
    Ok(out)
}

/// Where an item's conditioning vector comes from when building a forward
/// pass. `TapeRow` lets encoder outputs feed the denoiser inside one tape, so
/// a single backward sweep reaches the encoder; `Null` routes gradients to
/// the learned null-condition parameter.
#[derive(Debug, Clone)]
pub enum CondSource {
    Value(Array1<f64>),
    TapeRow { node: NodeId, row: usize },
    Null,
}

/// One instance of a forward batch: a noisy label (or token sequence) with
/// its timestep and conditioning.
#[derive(Debug, Clone)]
pub struct ForwardItem {
    /// seq_len × classes.
    pub y: Array2<f64>,
    pub t: usize,
    pub cond: CondSource,
}

/// Node handles into the tape for one batched forward pass.
#[derive(Debug, Clone, Copy)]
pub struct ForwardHandles {
    /// Stacked logits, (items · seq_len) × classes.
    pub logits: NodeId,
    /// Stacked noisy-label input leaf, same layout as `logits`.
    pub input: NodeId,
    /// Materialized condition rows, items × cond_dim.
    pub conds: NodeId,
}

/// Gradients of ⟨grad_logits, logits⟩ from a dedicated single-tape backward.
pub struct DenoiserGrads {
    /// Aligned with the parameter store.
    pub params: Vec<Array2<f64>>,
    /// Gradient w.r.t. the stacked noisy-label input.
    pub input: Array2<f64>,
    /// Gradient w.r.t. the condition rows (one row per item).
    pub conds: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct Denoiser {
    pub spec: DenoiserSpec,
    pub params: ParamStore,
}

impl Denoiser {
    /// Fan-in scaled-uniform init; the output head and the null condition
    /// start at zero, so an untrained model emits all-zero logits.
    pub fn init(spec: DenoiserSpec, rng: &mut NoiseSource) -> Result<Self> {
        spec.validate()?;
        let (k, c, h) = (spec.classes, spec.cond_dim, spec.hidden_dim);
        let mut store = ParamStore::new();
        init_linear(&mut store, rng, "input.w", k, h);
        store.insert("input.b", Array2::zeros((1, h)));
        init_linear(&mut store, rng, "time.w", spec.time_embed_dim, h);
        store.insert("time.b", Array2::zeros((1, h)));
        init_linear(&mut store, rng, "cond.w", c, h);
        store.insert("cond.b", Array2::zeros((1, h)));
        for b in 0..spec.depth {
            if spec.seq_len > 1 {
                init_attention(&mut store, rng, &format!("block{b}.attn"), h);
            }
            init_mlp(&mut store, rng, &format!("block{b}.mlp"), h, MLP_EXPANSION * h);
        }
        store.insert("head.w", Array2::zeros((h, k)));
        store.insert("head.b", Array2::zeros((1, k)));
        store.insert("null_cond", Array2::zeros((1, c)));
        Ok(Denoiser { spec, params: store })
    }

    pub fn null_cond_id(&self) -> ParamId {
        self.params.id("null_cond")
    }

    pub fn null_condition(&self) -> Array1<f64> {
        self.params.get(self.null_cond_id()).row(0).to_owned()
    }

    /// Build one batched forward pass onto `tape`. All items are processed in
    /// a single pass; for seq_len > 1 every block's self-attention couples
    /// the token positions of an item (and its condition slot), never rows of
    /// different items.
    pub fn forward_into(
        &self,
        tape: &mut Tape,
        items: &[ForwardItem],
    ) -> Result<ForwardHandles> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("empty forward batch".into()));
        }
        let spec = &self.spec;
        let (n, k, c) = (spec.seq_len, spec.classes, spec.cond_dim);
        let b = items.len();

        let mut y_stack = Array2::zeros((b * n, k));
        let mut te_stack = Array2::zeros((b * n, spec.time_embed_dim));
        for (i, item) in items.iter().enumerate() {
            if item.y.dim() != (n, k) {
                return Err(Error::ShapeMismatch(format!(
                    "item {i}: noisy label is {:?}, spec wants ({n}, {k})",
                    item.y.dim()
                )));
            }
            if item.y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("item {i} noisy label")));
            }
            let te = time_embedding(item.t, spec.time_embed_dim)?;
            for r in 0..n {
                y_stack.row_mut(i * n + r).assign(&item.y.row(r));
                te_stack.row_mut(i * n + r).assign(&te);
            }
        }

        let store = &self.params;
        let input = tape.leaf(y_stack);
        let te_leaf = tape.leaf(te_stack);

        // Condition rows: shared tape slices, literal values, or the learned
        // null vector. The null param node is pushed once and reused.
        let mut null_node: Option<NodeId> = None;
        let mut pieces = Vec::with_capacity(b);
        for item in items {
            let piece = match &item.cond {
                CondSource::Value(v) => {
                    if v.len() != c {
                        return Err(Error::ShapeMismatch(format!(
                            "condition width {} != cond_dim {c}",
                            v.len()
                        )));
                    }
                    let row = v.view().insert_axis(ndarray::Axis(0)).to_owned();
                    tape.leaf(row)
                }
                CondSource::TapeRow { node, row } => tape.slice_rows(*node, *row, 1),
                CondSource::Null => *null_node
                    .get_or_insert_with(|| tape.param(store, store.id("null_cond"))),
            };
            pieces.push(piece);
        }
        let conds = tape.concat_rows(&pieces);

        let w_in = tape.param(store, store.id("input.w"));
        let b_in = tape.param(store, store.id("input.b"));
        let w_t = tape.param(store, store.id("time.w"));
        let b_t = tape.param(store, store.id("time.b"));
        let w_c = tape.param(store, store.id("cond.w"));
        let b_c = tape.param(store, store.id("cond.b"));

        let h_tok = tape.matmul(input, w_in);
        let h_tok = tape.add_row(h_tok, b_in);
        let h_te = tape.matmul(te_leaf, w_t);
        let h_te = tape.add_row(h_te, b_t);
        let h_tok = tape.add(h_tok, h_te);
        let h_cond = tape.matmul(conds, w_c);
        let h_cond = tape.add_row(h_cond, b_c);

        let mut stack;
        let rows_per_group;
        if n == 1 {
            // Single-token: additive condition injection, no attention.
            stack = tape.add(h_tok, h_cond);
            rows_per_group = 1;
        } else {
            // Multi-token: group layout [condition; tokens] per item.
            let mut groups = Vec::with_capacity(2 * b);
            for i in 0..b {
                groups.push(tape.slice_rows(h_cond, i, 1));
                groups.push(tape.slice_rows(h_tok, i * n, n));
            }
            stack = tape.concat_rows(&groups);
            rows_per_group = n + 1;
        }

        for blk in 0..spec.depth {
            if n > 1 {
                let attn = lookup_attention(store, &format!("block{blk}.attn"));
                stack = group_attention(tape, store, stack, b, rows_per_group, &attn);
            }
            let mlp = lookup_mlp(store, &format!("block{blk}.mlp"));
            stack = mlp_residual(tape, store, stack, &mlp);
        }

        let tokens = if n == 1 {
            stack
        } else {
            let mut toks = Vec::with_capacity(b);
            for i in 0..b {
                toks.push(tape.slice_rows(stack, i * rows_per_group + 1, n));
            }
            tape.concat_rows(&toks)
        };

        let w_head = tape.param(store, store.id("head.w"));
        let b_head = tape.param(store, store.id("head.b"));
        let logits = tape.matmul(tokens, w_head);
        let logits = tape.add_row(logits, b_head);

        if tape.value(logits).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("denoiser logits".into()));
        }

        Ok(ForwardHandles { logits, input, conds })
    }

    /// Convenience single-tape forward.
    pub fn forward(&self, items: &[ForwardItem]) -> Result<(Tape, ForwardHandles)> {
        let mut tape = Tape::new();
        let handles = self.forward_into(&mut tape, items)?;
        Ok((tape, handles))
    }

    /// Logits of a single item without keeping the tape (inference path).
    pub fn logits(&self, item: &ForwardItem) -> Result<Array2<f64>> {
        let (tape, h) = self.forward(std::slice::from_ref(item))?;
        Ok(tape.value(h.logits).clone())
    }

    /// Exact reverse-mode gradients of ⟨grad_logits, logits⟩ for a forward
    /// pass that was built with [`Denoiser::forward`].
    pub fn backward(
        &self,
        tape: &Tape,
        handles: ForwardHandles,
        grad_logits: Array2<f64>,
    ) -> Result<DenoiserGrads> {
        if grad_logits.dim() != tape.value(handles.logits).dim() {
            return Err(Error::ShapeMismatch(format!(
                "grad_logits is {:?}, logits are {:?}",
                grad_logits.dim(),
                tape.value(handles.logits).dim()
            )));
        }
        let back = tape.backward(handles.logits, grad_logits);
        let params = back.param_grads_for(&self.params);
        let input = back
            .node_grad(handles.input)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(tape.value(handles.input).dim()));
        let conds = back
            .node_grad(handles.conds)
            .cloned()
            .unwrap_or_else(|| Array2::zeros(tape.value(handles.conds).dim()));
        Ok(DenoiserGrads { params, input, conds })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, streams, uniform_matrix};

    fn small_spec() -> DenoiserSpec {
        DenoiserSpec {
            classes: 4,
            cond_dim: 3,
            hidden_dim: 8,
            depth: 2,
            time_embed_dim: 6,
            seq_len: 1,
        }
    }

    fn randomize(d: &mut Denoiser, rng: &mut NoiseSource) {
        // Zero-init head/null make gradients trivially zero; perturb all
        // tensors so checks are informative.
        for i in 0..d.params.len() {
            let pid = d.params.param_id(i);
            let t = d.params.get_mut(pid);
            let noise = uniform_matrix(rng, t.nrows(), t.ncols(), 0.4);
            *t += &noise;
        }
    }

    #[test]
    fn zero_head_gives_zero_logits() {
        let mut rng = stream(21, streams::INIT);
        let d = Denoiser::init(small_spec(), &mut rng).unwrap();
        let item = ForwardItem {
            y: uniform_matrix(&mut rng, 1, 4, 2.0),
            t: 17,
            cond: CondSource::Value(Array1::from_vec(vec![0.3, -0.2, 0.9])),
        };
        let logits = d.logits(&item).unwrap();
        assert!(logits.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn init_is_deterministic() {
        let a = Denoiser::init(small_spec(), &mut stream(5, streams::INIT)).unwrap();
        let b = Denoiser::init(small_spec(), &mut stream(5, streams::INIT)).unwrap();
        for ((_, ta), (_, tb)) in a.params.iter().zip(b.params.iter()) {
            assert_eq!(ta, tb);
        }
    }

    #[test]
    fn param_count_matches_shape_sum() {
        // Independent shape arithmetic, written out term by term.
        for (spec, expect_attn) in [
            (small_spec(), false),
            (
                DenoiserSpec {
                    classes: 5,
                    cond_dim: 4,
                    hidden_dim: 6,
                    depth: 3,
                    time_embed_dim: 4,
                    seq_len: 3,
                },
                true,
            ),
        ] {
            let d = Denoiser::init(spec, &mut stream(6, streams::INIT)).unwrap();
            let (k, c, h, te) = (spec.classes, spec.cond_dim, spec.hidden_dim, spec.time_embed_dim);
            let f = 2 * h;
            let mut by_hand = (k * h + h) + (te * h + h) + (c * h + h) + (h * k + k) + c;
            by_hand += spec.depth * (h * f + f + f * h + h);
            if expect_attn {
                by_hand += spec.depth * 4 * h * h;
            }
            assert_eq!(spec.param_count(), by_hand);
            assert_eq!(d.params.param_count(), by_hand);
        }
    }

    #[test]
    fn forward_is_pure() {
        let mut rng = stream(22, streams::INIT);
        let mut d = Denoiser::init(small_spec(), &mut rng).unwrap();
        randomize(&mut d, &mut rng);
        let item = ForwardItem {
            y: uniform_matrix(&mut rng, 1, 4, 2.0),
            t: 5,
            cond: CondSource::Value(Array1::from_vec(vec![1.0, 0.0, -1.0])),
        };
        let a = d.logits(&item).unwrap();
        let b = d.logits(&item).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn multi_token_logits_from_one_pass_and_coupled() {
        let spec = DenoiserSpec {
            classes: 5,
            cond_dim: 3,
            hidden_dim: 8,
            depth: 1,
            time_embed_dim: 4,
            seq_len: 3,
        };
        let mut rng = stream(23, streams::INIT);
        let mut d = Denoiser::init(spec, &mut rng).unwrap();
        randomize(&mut d, &mut rng);
        let cond = Array1::from_vec(vec![0.2, -0.4, 0.1]);
        let y = uniform_matrix(&mut rng, 3, 5, 1.0);
        let item = ForwardItem { y: y.clone(), t: 9, cond: CondSource::Value(cond.clone()) };
        let logits = d.logits(&item).unwrap();
        assert_eq!(logits.dim(), (3, 5));

        // Perturbing token 0 must move the other tokens' logits: all rows are
        // produced jointly by the attention coupling, not token-by-token.
        let mut y2 = y.clone();
        y2[(0, 0)] += 0.5;
        let logits2 = d
            .logits(&ForwardItem { y: y2, t: 9, cond: CondSource::Value(cond) })
            .unwrap();
        let moved = (&logits2.row(2) - &logits.row(2)).iter().any(|v| v.abs() > 1e-12);
        assert!(moved, "token 2 logits did not react to token 0");
    }

    #[test]
    fn backward_zero_seed_gives_zero_grads() {
        let mut rng = stream(24, streams::INIT);
        let mut d = Denoiser::init(small_spec(), &mut rng).unwrap();
        randomize(&mut d, &mut rng);
        let item = ForwardItem {
            y: uniform_matrix(&mut rng, 1, 4, 1.0),
            t: 3,
            cond: CondSource::Value(Array1::from_vec(vec![0.1, 0.2, 0.3])),
        };
        let (tape, h) = d.forward(std::slice::from_ref(&item)).unwrap();
        let grads = d.backward(&tape, h, Array2::zeros((1, 4))).unwrap();
        assert!(grads.params.iter().all(|g| g.iter().all(|&v| v == 0.0)));
        assert!(grads.input.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_is_linear_in_seed() {
        let mut rng = stream(25, streams::INIT);
        let mut d = Denoiser::init(small_spec(), &mut rng).unwrap();
        randomize(&mut d, &mut rng);
        let item = ForwardItem {
            y: uniform_matrix(&mut rng, 1, 4, 1.0),
            t: 3,
            cond: CondSource::Value(Array1::from_vec(vec![0.1, 0.2, 0.3])),
        };
        let g1 = uniform_matrix(&mut rng, 1, 4, 1.0);
        let g2 = uniform_matrix(&mut rng, 1, 4, 1.0);

        let run = |seed: Array2<f64>| {
            let (tape, h) = d.forward(std::slice::from_ref(&item)).unwrap();
            d.backward(&tape, h, seed).unwrap()
        };
        let a = run(g1.clone());
        let b = run(g2.clone());
        let ab = run(&g1 + &g2);
        for ((ga, gb), gab) in a.params.iter().zip(b.params.iter()).zip(ab.params.iter()) {
            let sum = ga + gb;
            for (x, y) in sum.iter().zip(gab.iter()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        // Denoiser-only check at small scale; the composed-loss version lives
        // in the gradcheck integration suite.
        let specs = [
            small_spec(),
            DenoiserSpec {
                classes: 3,
                cond_dim: 2,
                hidden_dim: 5,
                depth: 1,
                time_embed_dim: 4,
                seq_len: 2,
            },
        ];
        for (si, spec) in specs.into_iter().enumerate() {
            let mut rng = stream(26 + si as u64, streams::INIT);
            let mut d = Denoiser::init(spec, &mut rng).unwrap();
            randomize(&mut d, &mut rng);
            let item = ForwardItem {
                y: uniform_matrix(&mut rng, spec.seq_len, spec.classes, 1.0),
                t: 2,
                cond: CondSource::Value(
                    (0..spec.cond_dim).map(|i| 0.1 * (i as f64 + 1.0)).collect(),
                ),
            };
            let seed = uniform_matrix(&mut rng, spec.seq_len, spec.classes, 1.0);

            let (tape, h) = d.forward(std::slice::from_ref(&item)).unwrap();
            let grads = d.backward(&tape, h, seed.clone()).unwrap();

            let delta = 1e-5;
            let mut checked = 0usize;
            for pi in 0..d.params.len() {
                let pid = d.params.param_id(pi);
                let dim = d.params.get(pid).dim();
                for idx in 0..dim.0 * dim.1 {
                    if idx % 3 != 0 {
                        continue; // probe a third of the coordinates
                    }
                    let (r, c) = (idx / dim.1, idx % dim.1);
                    let orig = d.params.get(pid)[(r, c)];
                    d.params.get_mut(pid)[(r, c)] = orig + delta;
                    let fp = (&d.logits(&item).unwrap() * &seed).sum();
                    d.params.get_mut(pid)[(r, c)] = orig - delta;
                    let fm = (&d.logits(&item).unwrap() * &seed).sum();
                    d.params.get_mut(pid)[(r, c)] = orig;
                    let numeric = (fp - fm) / (2.0 * delta);
                    let analytic = grads.params[pi][(r, c)];
                    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
                    assert!(
                        (analytic - numeric).abs() / denom < 1e-4,
                        "param {pi} ({r},{c}): analytic {analytic} vs numeric {numeric}"
                    );
                    checked += 1;
                }
            }
            assert!(checked > 100);
        }
    }

    #[test]
    fn input_jacobian_matches_finite_differences() {
        let mut rng = stream(29, streams::INIT);
        let spec = small_spec();
        let mut d = Denoiser::init(spec, &mut rng).unwrap();
        randomize(&mut d, &mut rng);
        let y = uniform_matrix(&mut rng, 1, 4, 1.0);
        let cond = Array1::from_vec(vec![0.5, -0.5, 0.25]);
        let seed = uniform_matrix(&mut rng, 1, 4, 1.0);

        let item = ForwardItem { y: y.clone(), t: 7, cond: CondSource::Value(cond.clone()) };
        let (tape, h) = d.forward(std::slice::from_ref(&item)).unwrap();
        let grads = d.backward(&tape, h, seed.clone()).unwrap();

        let delta = 1e-5;
        for j in 0..4 {
            let mut yp = y.clone();
            yp[(0, j)] += delta;
            let mut ym = y.clone();
            ym[(0, j)] -= delta;
            let fp = (&d
                .logits(&ForwardItem { y: yp, t: 7, cond: CondSource::Value(cond.clone()) })
                .unwrap()
                * &seed)
                .sum();
            let fm = (&d
                .logits(&ForwardItem { y: ym, t: 7, cond: CondSource::Value(cond.clone()) })
                .unwrap()
                * &seed)
                .sum();
            let numeric = (fp - fm) / (2.0 * delta);
            let analytic = grads.input[(0, j)];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!((analytic - numeric).abs() / denom < 1e-4);
        }
    }

    #[test]
    fn time_embedding_basics() {
        let e = time_embedding(0, 8).unwrap();
        assert!(e.slice(ndarray::s![0..4]).iter().all(|&v| v == 0.0));
        assert!(e.slice(ndarray::s![4..8]).iter().all(|&v| v == 1.0));
        assert!(time_embedding(3, 5).is_err());
        for t in [1usize, 17, 999, 123456] {
            let e = time_embedding(t, 16).unwrap();
            assert!(e.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn time_embedding_injective_over_horizon() {
        // Brute-force collision scan, exact bit comparison.
        use std::collections::HashSet;
        let mut seen = HashSet::new();
        for t in 0..=1000usize {
            let e = time_embedding(t, 4).unwrap();
            let bits: Vec<u64> = e.iter().map(|v| v.to_bits()).collect();
            assert!(seen.insert(bits), "collision at t = {t}");
        }
    }

    #[test]
    fn rejects_bad_specs_and_shapes() {
        let mut rng = stream(30, streams::INIT);
        assert!(Denoiser::init(
            DenoiserSpec { classes: 0, ..small_spec() },
            &mut rng
        )
        .is_err());
        assert!(Denoiser::init(
            DenoiserSpec { time_embed_dim: 3, ..small_spec() },
            &mut rng
        )
        .is_err());

        let d = Denoiser::init(small_spec(), &mut rng).unwrap();
        let bad = ForwardItem {
            y: Array2::zeros((2, 4)), // wrong seq_len
            t: 0,
            cond: CondSource::Null,
        };
        assert!(d.forward(std::slice::from_ref(&bad)).is_err());
        let bad_cond = ForwardItem {
            y: Array2::zeros((1, 4)),
            t: 0,
            cond: CondSource::Value(Array1::zeros(2)),
        };
        assert!(d.forward(std::slice::from_ref(&bad_cond)).is_err());
    }
}
