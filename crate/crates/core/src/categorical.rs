//! Vector-space mechanics of diffusion over one-hot labels: construction,
//! Gaussian forward corruption, discretization back to the one-hot space, and
//! reduced-variance re-noising for the reverse loop.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{normal, NoiseSource};
use crate::schedule::Schedule;

/// A categorical choice out of `dim` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneHot {
    pub dim: usize,
    pub index: usize,
}

impl OneHot {
    pub fn new(index: usize, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("one-hot dimension must be >= 1".into()));
        }
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "one-hot index {index} out of range [0, {dim})"
            )));
        }
        Ok(OneHot { dim, index })
    }

    /// Dense rendering e_index: exactly one coordinate 1, the rest 0.
    pub fn dense(&self) -> Array1<f64> {
        let mut v = Array1::zeros(self.dim);
        v[self.index] = 1.0;
        v
    }
}

/// A Gaussian-corrupted label vector at a known timestep. Entries are
/// unconstrained reals but must be finite.
#[derive(Debug, Clone)]
pub struct NoisyLabel {
    pub values: Array1<f64>,
    pub t: usize,
}

/// A normalized distribution over classes.
#[derive(Debug, Clone)]
pub struct CategoricalDistribution {
    pub probs: Array1<f64>,
}

/// The paper-ambiguous re-noise coefficient: the literal reading uses the
/// per-step α, the schedule-consistent reading uses the cumulative ᾱ.
/// Default ᾱ: it reproduces the forward marginal and terminates at an exact
/// one-hot when t reaches 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenoiseVariant {
    Alpha,
    #[default]
    AlphaBar,
}

impl std::str::FromStr for RenoiseVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(RenoiseVariant::Alpha),
            "alpha_bar" => Ok(RenoiseVariant::AlphaBar),
            other => Err(Error::InvalidArgument(format!(
                "unknown renoise variant `{other}` (expected alpha|alpha_bar)"
            ))),
        }
    }
}

pub fn one_hot(index: usize, dim: usize) -> Result<OneHot> {
    OneHot::new(index, dim)
}

/// Forward corruption: √ᾱ_t·y₀ + √(1−ᾱ_t)·ε with fresh ε ~ N(0, I).
///
/// At t = 0 the noise coefficient is exactly zero and the dense y₀ is
/// returned without evaluating the noise term.
pub fn corrupt(
    y0: &OneHot,
    t: usize,
    schedule: &Schedule,
    rng: &mut NoiseSource,
) -> Result<NoisyLabel> {
    let abar = schedule.alpha_bar(t)?;
    Ok(NoisyLabel {
        values: scaled_noisy(&y0.dense(), abar, rng),
        t,
    })
}

/// Like [`corrupt`] but also returns the ε that was drawn, for objectives
/// that regress the noise.
pub fn corrupt_with_noise(
    y0: &OneHot,
    t: usize,
    schedule: &Schedule,
    rng: &mut NoiseSource,
) -> Result<(NoisyLabel, Array1<f64>)> {
    let abar = schedule.alpha_bar(t)?;
    let dense = y0.dense();
    let eps = Array1::from_iter((0..dense.len()).map(|_| normal(rng)));
    let values = if abar == 1.0 {
        dense
    } else {
        let (sa, sn) = (abar.sqrt(), (1.0 - abar).sqrt());
        &dense * sa + &eps * sn
    };
    Ok((NoisyLabel { values, t }, eps))
}

fn scaled_noisy(dense: &Array1<f64>, coef: f64, rng: &mut NoiseSource) -> Array1<f64> {
    if coef == 1.0 {
        // Exact: no noise term is evaluated, so the RNG is not advanced.
        return dense.clone();
    }
    let sa = coef.sqrt();
    let sn = (1.0 - coef).sqrt();
    dense.mapv(|x| x * sa) + Array1::from_iter((0..dense.len()).map(|_| normal(rng) * sn))
}

/// Re-inject reduced noise around a discretized prediction:
/// √coef·ŷ₀ + √(1−coef)·ε, where coef is α or ᾱ at `t_prev` per the variant.
pub fn renoise(
    y_hat: &OneHot,
    t_prev: usize,
    schedule: &Schedule,
    variant: RenoiseVariant,
    rng: &mut NoiseSource,
) -> Result<NoisyLabel> {
    let coef = match variant {
        RenoiseVariant::Alpha => schedule.alpha(t_prev)?,
        RenoiseVariant::AlphaBar => schedule.alpha_bar(t_prev)?,
    };
    Ok(NoisyLabel {
        values: scaled_noisy(&y_hat.dense(), coef, rng),
        t: t_prev,
    })
}

/// Project onto the one-hot space by argmax; ties break to the lowest index.
pub fn discretize(values: &Array1<f64>) -> Result<OneHot> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("discretize on empty vector".into()));
    }
    let mut best = 0usize;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &v) in values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::NonFinite("discretize input".into()));
        }
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    OneHot::new(best, values.len())
}

/// Temperature softmax with max-subtraction for stability.
pub fn softmax(logits: &Array1<f64>, temperature: f64) -> Result<CategoricalDistribution> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "softmax temperature {temperature} must be > 0"
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax input".into()));
    }
    if logits.is_empty() {
        return Err(Error::InvalidArgument("softmax on empty vector".into()));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps = logits.mapv(|v| ((v - max) / temperature).exp());
    let sum: f64 = exps.sum();
    Ok(CategoricalDistribution { probs: exps / sum })
}

/// Draw an index from the distribution by inverse-CDF over the stored probs.
pub fn sample_categorical(
    dist: &CategoricalDistribution,
    rng: &mut NoiseSource,
) -> Result<OneHot> {
    if dist.probs.iter().any(|p| p.is_nan()) {
        return Err(Error::NonFinite("sample_categorical input".into()));
    }
    let k = dist.probs.len();
    let u: f64 = rand::Rng::random(rng);
    let mut acc = 0.0;
    for (i, &p) in dist.probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return OneHot::new(i, k);
        }
    }
    // Rounding left u past the accumulated mass; highest index takes it.
    OneHot::new(k - 1, k)
}

impl CategoricalDistribution {
    /// Invariant check: nonnegative entries summing to 1 within 1e-6.
    pub fn validate(&self) -> Result<()> {
        if self.probs.iter().any(|&p| !(p >= 0.0)) {
            return Err(Error::InvalidArgument("negative or NaN probability".into()));
        }
        let sum: f64 = self.probs.sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }
}
