//! Diffusion defined directly on one-hot categorical vectors.
//!
//! The forward process perturbs one-hot labels with Gaussian noise under a
//! variance schedule; the denoiser predicts class distributions which are
//! discretized by argmax and re-noised with reduced variance, sharpening into
//! clean one-hot outputs over a handful of steps. Training minimizes an
//! ᾱ-weighted cross-entropy. A masked-recovery baseline, synthetic tasks with
//! exact oracles, and checkpoint/dataset/config formats round out the crate.

mod blocks;

pub mod categorical;
pub mod denoiser;
pub mod encoder;
pub mod error;
pub mod optim;
pub mod rng;
pub mod schedule;
pub mod tape;
pub mod training;

pub use categorical::{OneHot, RenoiseVariant};
pub use denoiser::{Denoiser, DenoiserSpec};
pub use encoder::{Encoder, EncoderSpec, Pooling};
pub use error::{Error, Result};
pub use schedule::{Schedule, ScheduleKind};
pub use training::{Condition, LossKind, TrainConfig};
