//! Training objectives and batch machinery: the ᾱ-weighted cross-entropy
//! loss, the noise-regression ablation, K-fold feature reuse, condition
//! dropout for classifier-free guidance, and the warmup + cosine learning
//! rate schedule.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::categorical::OneHot;
use crate::error::{Error, Result};
use crate::rng::{normal, NoiseSource};
use crate::schedule::Schedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// −ᾱ_t Σ y₀ log p; the decay coefficient down-weights heavily corrupted
    /// timesteps.
    WeightedCe,
    /// The same cross-entropy without the ᾱ_t coefficient.
    UnweightedCe,
    /// Regress the forward noise ε with mean squared error (the conventional
    /// diffusion objective, kept as an ablation baseline).
    MseNoise,
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            LossKind::WeightedCe => "weighted_ce",
            LossKind::UnweightedCe => "unweighted_ce",
            LossKind::MseNoise => "mse_noise",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighted_ce" => Ok(LossKind::WeightedCe),
            "unweighted_ce" => Ok(LossKind::UnweightedCe),
            "mse_noise" => Ok(LossKind::MseNoise),
            other => Err(Error::InvalidArgument(format!(
                "unknown loss kind `{other}` (expected weighted_ce|unweighted_ce|mse_noise)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub warmup_epochs: usize,
    pub grad_clip_norm: f64,
    pub loss_kind: LossKind,
    pub cfg_dropout_prob: f64,
    pub kfold: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 256,
            learning_rate: 1e-3,
            weight_decay: 0.05,
            warmup_epochs: 2,
            grad_clip_norm: 3.0,
            loss_kind: LossKind::WeightedCe,
            cfg_dropout_prob: 0.1,
            kfold: 4,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || self.kfold == 0 {
            return Err(Error::InvalidArgument(
                "epochs, batch_size and kfold must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.cfg_dropout_prob) {
            return Err(Error::InvalidArgument(format!(
                "cfg_dropout_prob {} outside [0, 1]",
                self.cfg_dropout_prob
            )));
        }
        if !(self.learning_rate >= 0.0 && self.weight_decay >= 0.0 && self.grad_clip_norm > 0.0) {
            return Err(Error::InvalidArgument(
                "learning_rate, weight_decay must be >= 0 and grad_clip_norm > 0".into(),
            ));
        }
        Ok(())
    }
}

/// A conditioning vector with a null flag for guidance dropout. When
/// `is_null` is set the denoiser substitutes its learned null-condition
/// parameter at use time.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub vector: Array1<f64>,
    pub is_null: bool,
}

impl Condition {
    pub fn new(vector: Array1<f64>) -> Self {
        Condition { vector, is_null: false }
    }

    pub fn null(dim: usize) -> Self {
        Condition { vector: Array1::zeros(dim), is_null: true }
    }
}

/// With probability `p`, replace the condition by the null condition.
pub fn cfg_dropout(c: &Condition, p: f64, rng: &mut NoiseSource) -> Result<Condition> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("dropout probability {p} outside [0, 1]")));
    }
    Ok(if drop_to_null(p, rng) {
        Condition::null(c.vector.len())
    } else {
        c.clone()
    })
}

/// The dropout coin itself; one uniform draw per call.
pub fn drop_to_null(p: f64, rng: &mut NoiseSource) -> bool {
    let u: f64 = rand::Rng::random(rng);
    u < p
}

/// One expanded training tuple. The conditioning features are shared by
/// `instance` index rather than copied; that sharing is the point of the
/// K-fold reuse strategy.
#[derive(Debug, Clone)]
pub struct TrainTuple {
    pub instance: usize,
    pub t: usize,
    /// seq_len × classes corrupted label(s).
    pub noisy: Array2<f64>,
    /// The ε that produced `noisy`, kept for the noise-regression objective.
    pub noise: Array2<f64>,
    pub targets: Vec<OneHot>,
}

/// Expand a batch K-fold: each instance appears `kfold` times, paired with
/// `kfold` distinct timesteps drawn uniformly from [1, T] and independently
/// corrupted labels. Tokens of a sequence are corrupted independently at the
/// shared timestep.
pub fn kfold_expand(
    targets: &[Vec<OneHot>],
    kfold: usize,
    schedule: &Schedule,
    rng: &mut NoiseSource,
) -> Result<Vec<TrainTuple>> {
    if kfold == 0 {
        return Err(Error::InvalidArgument("kfold must be >= 1".into()));
    }
    if kfold > schedule.horizon {
        return Err(Error::InvalidArgument(format!(
            "kfold {} > horizon {}: cannot draw distinct timesteps",
            kfold, schedule.horizon
        )));
    }
    let mut out = Vec::with_capacity(targets.len() * kfold);
    for (instance, toks) in targets.iter().enumerate() {
        if toks.is_empty() {
            return Err(Error::InvalidArgument(format!("instance {instance} has no targets")));
        }
        let k_classes = toks[0].dim;
        let mut drawn: Vec<usize> = Vec::with_capacity(kfold);
        while drawn.len() < kfold {
            let t = rand::Rng::random_range(rng, 1..=schedule.horizon);
            if !drawn.contains(&t) {
                drawn.push(t);
            }
        }
        for &t in &drawn {
            let abar = schedule.alpha_bar(t)?;
            let (sa, sn) = (abar.sqrt(), (1.0 - abar).sqrt());
            let n = toks.len();
            let mut noisy = Array2::zeros((n, k_classes));
            let mut noise = Array2::zeros((n, k_classes));
            for (row, tok) in toks.iter().enumerate() {
                if tok.dim != k_classes {
                    return Err(Error::ShapeMismatch(format!(
                        "instance {instance}: token class counts differ"
                    )));
                }
                for col in 0..k_classes {
                    let eps = normal(rng);
                    noise[(row, col)] = eps;
                    let clean = if col == tok.index { 1.0 } else { 0.0 };
                    noisy[(row, col)] = sa * clean + sn * eps;
                }
            }
            out.push(TrainTuple { instance, t, noisy, noise, targets: toks.clone() });
        }
    }
    Ok(out)
}

/// Timestep-conditioned cross entropy over one tuple:
/// loss = w · Σ_i −log softmax(logits_i)[target_i] with w = ᾱ_t when
/// weighted, else 1. The returned gradient is the exact analytic
/// w · (softmax(logits_i) − y₀_i) per token.
pub fn ce_loss(
    logits: &Array2<f64>,
    targets: &[OneHot],
    abar_t: f64,
    weighted: bool,
) -> Result<(f64, Array2<f64>)> {
    if logits.nrows() != targets.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} logit rows vs {} targets",
            logits.nrows(),
            targets.len()
        )));
    }
    if !(abar_t > 0.0 && abar_t <= 1.0) {
        return Err(Error::InvalidArgument(format!("abar_t {abar_t} outside (0, 1]")));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ce_loss logits".into()));
    }
    let w = if weighted { abar_t } else { 1.0 };
    let k = logits.ncols();
    let mut sum = 0.0;
    let mut grad = Array2::zeros(logits.dim());
    for (i, target) in targets.iter().enumerate() {
        if target.dim != k {
            return Err(Error::ShapeMismatch(format!(
                "target dim {} vs {k} logit columns",
                target.dim
            )));
        }
        let row = logits.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_z = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        sum += log_z - row[target.index];
        for j in 0..k {
            let p = (row[j] - log_z).exp();
            let y = if j == target.index { 1.0 } else { 0.0 };
            grad[(i, j)] = w * (p - y);
        }
    }
    Ok((w * sum, grad))
}

/// Mean squared error over all coordinates, with the exact gradient
/// 2(prediction − target)/count.
pub fn mse_loss(prediction: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if prediction.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mse shapes {:?} vs {:?}",
            prediction.dim(),
            target.dim()
        )));
    }
    if prediction.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("mse_loss inputs".into()));
    }
    let count = prediction.len() as f64;
    let diff = prediction - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / count;
    let grad = diff.mapv(|d| 2.0 * d / count);
    Ok((loss, grad))
}

/// Linear ramp 0 → base over warmup, then cosine decay base → 0.
pub fn lr_at(step: u64, total_steps: u64, warmup_steps: u64, base_lr: f64) -> Result<f64> {
    if warmup_steps > total_steps {
        return Err(Error::InvalidArgument(format!(
            "warmup_steps {warmup_steps} > total_steps {total_steps}"
        )));
    }
    if step > total_steps {
        return Err(Error::InvalidArgument(format!(
            "step {step} > total_steps {total_steps}"
        )));
    }
    if step < warmup_steps {
        return Ok(base_lr * step as f64 / warmup_steps as f64);
    }
    if total_steps == warmup_steps {
        return Ok(if step == warmup_steps { base_lr } else { 0.0 });
    }
    let progress = (step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64;
    Ok(base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}
