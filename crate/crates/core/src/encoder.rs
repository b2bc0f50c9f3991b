//! Toy feature encoder: a learnable class token is prepended to the input
//! tokens, the stack runs through M attention + feed-forward layers, and the
//! conditioning vector is either the final class-token state or the mean of
//! the final non-class tokens.
//!
//! There are no positional terms: the synthetic feature tokens are unordered,
//! which keeps mean-pooled encoding permutation invariant.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::blocks::{group_attention, init_attention, init_mlp, lookup_attention, lookup_mlp, mlp_residual};
use crate::error::{Error, Result};
use crate::rng::{uniform_matrix, NoiseSource};
use crate::tape::{NodeId, ParamStore, Tape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    ClassToken,
    Mean,
}

impl std::str::FromStr for Pooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class_token" => Ok(Pooling::ClassToken),
            "mean" => Ok(Pooling::Mean),
            other => Err(Error::InvalidArgument(format!(
                "unknown pooling `{other}` (expected class_token|mean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub token_dim: usize,
    pub num_layers: usize,
    pub pooling: Pooling,
}

impl EncoderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.token_dim == 0 || self.num_layers == 0 {
            return Err(Error::InvalidArgument(
                "encoder dims and layer count must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EncoderHandles {
    /// Conditioning rows, one per encoded instance (items × token_dim).
    pub conditions: NodeId,
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub spec: EncoderSpec,
    pub params: ParamStore,
}

impl Encoder {
    pub fn init(spec: EncoderSpec, rng: &mut NoiseSource) -> Result<Self> {
        spec.validate()?;
        let d = spec.token_dim;
        let mut store = ParamStore::new();
        let bound = 1.0 / (d as f64).sqrt();
        store.insert("zcls", uniform_matrix(rng, 1, d, bound));
        for m in 0..spec.num_layers {
            init_attention(&mut store, rng, &format!("layer{m}.attn"), d);
            init_mlp(&mut store, rng, &format!("layer{m}.mlp"), d, 2 * d);
        }
        Ok(Encoder { spec, params: store })
    }

    /// Encode a batch of instances (each tokens_per_instance × token_dim, all
    /// the same length) in one tape. The class-token parameter node is shared
    /// across instances, so its gradient accumulates over the whole batch.
    pub fn encode_into(&self, tape: &mut Tape, instances: &[Array2<f64>]) -> Result<EncoderHandles> {
        if instances.is_empty() {
            return Err(Error::InvalidArgument("empty encoder batch".into()));
        }
        let d = self.spec.token_dim;
        let l = instances[0].nrows();
        if l == 0 {
            return Err(Error::InvalidArgument("encoder needs at least one token".into()));
        }
        for (i, inst) in instances.iter().enumerate() {
            if inst.dim() != (l, d) {
                return Err(Error::ShapeMismatch(format!(
                    "instance {i} is {:?}, expected ({l}, {d})",
                    inst.dim()
                )));
            }
        }
        let b = instances.len();
        let mut tok_stack = Array2::zeros((b * l, d));
        for (i, inst) in instances.iter().enumerate() {
            tok_stack
                .slice_mut(ndarray::s![i * l..(i + 1) * l, ..])
                .assign(inst);
        }
        let tokens = tape.leaf(tok_stack);
        let zcls = tape.param(&self.params, self.params.id("zcls"));

        let mut pieces = Vec::with_capacity(2 * b);
        for i in 0..b {
            pieces.push(zcls);
            pieces.push(tape.slice_rows(tokens, i * l, l));
        }
        let mut stack = tape.concat_rows(&pieces);
        let rows = l + 1;

        for m in 0..self.spec.num_layers {
            let attn = lookup_attention(&self.params, &format!("layer{m}.attn"));
            stack = group_attention(tape, &self.params, stack, b, rows, &attn);
            let mlp = lookup_mlp(&self.params, &format!("layer{m}.mlp"));
            stack = mlp_residual(tape, &self.params, stack, &mlp);
        }

        let mut cond_pieces = Vec::with_capacity(b);
        for i in 0..b {
            let piece = match self.spec.pooling {
                Pooling::ClassToken => tape.slice_rows(stack, i * rows, 1),
                Pooling::Mean => {
                    let toks = tape.slice_rows(stack, i * rows + 1, l);
                    tape.mean_rows(toks)
                }
            };
            cond_pieces.push(piece);
        }
        let conditions = tape.concat_rows(&cond_pieces);
        Ok(EncoderHandles { conditions })
    }

    /// Encode one instance and return the conditioning vector.
    pub fn encode(&self, tokens: &Array2<f64>) -> Result<Array1<f64>> {
        let mut tape = Tape::new();
        let h = self.encode_into(&mut tape, std::slice::from_ref(tokens))?;
        Ok(tape.value(h.conditions).row(0).to_owned())
    }
}
