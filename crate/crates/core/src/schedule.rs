//! Variance schedule: per-step noise quantities over a fixed horizon.
//!
//! The schedule drives both the forward corruption strength and the decay
//! coefficient of the weighted cross-entropy loss. `alpha_bars` is stored with
//! index 0 included (`alpha_bar(0) == 1`) so the loss weight and the t = 0
//! corruption identity need no special cases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
    Cosine,
}

impl std::fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScheduleKind::Linear => write!(f, "linear"),
            ScheduleKind::Cosine => write!(f, "cosine"),
        }
    }
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ScheduleKind::Linear),
            "cosine" => Ok(ScheduleKind::Cosine),
            other => Err(Error::InvalidArgument(format!(
                "unknown schedule kind `{other}` (expected linear|cosine)"
            ))),
        }
    }
}

/// Immutable after construction; safe to share across readers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub horizon: usize,
    /// β_t for t in 1..=T, stored at index t-1.
    pub betas: Vec<f64>,
    /// α_t = 1 − β_t, same indexing as `betas`.
    pub alphas: Vec<f64>,
    /// ᾱ_t for t in 0..=T; ᾱ_0 = 1, ᾱ_t = ∏_{s<=t} α_s.
    pub alpha_bars: Vec<f64>,
}

/// Default horizon, matching common convention for the linear schedule.
pub const DEFAULT_T: usize = 1000;
pub const DEFAULT_BETA_MIN: f64 = 1e-4;
pub const DEFAULT_BETA_MAX: f64 = 0.02;

/// Cosine schedules clip the per-step β at this value.
const COSINE_BETA_CLIP: f64 = 0.999;

pub fn build_schedule(
    kind: ScheduleKind,
    horizon: usize,
    beta_min: f64,
    beta_max: f64,
) -> Result<Schedule> {
    if horizon == 0 {
        return Err(Error::InvalidSchedule("horizon T must be >= 1".into()));
    }
    let betas = match kind {
        ScheduleKind::Linear => {
            if !(beta_min > 0.0 && beta_max < 1.0) {
                return Err(Error::InvalidSchedule(format!(
                    "beta bounds ({beta_min}, {beta_max}) must lie in (0, 1)"
                )));
            }
            if beta_min > beta_max {
                return Err(Error::InvalidSchedule(format!(
                    "beta_min {beta_min} > beta_max {beta_max}"
                )));
            }
            linear_betas(horizon, beta_min, beta_max)
        }
        // The cosine profile ignores the β bounds: it is defined by the
        // squared-cosine ᾱ curve with a clipped per-step β.
        ScheduleKind::Cosine => cosine_betas(horizon),
    };

    let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
    let mut alpha_bars = Vec::with_capacity(horizon + 1);
    alpha_bars.push(1.0);
    let mut prod = 1.0;
    for &a in &alphas {
        prod *= a;
        alpha_bars.push(prod);
    }

    Ok(Schedule {
        kind,
        horizon,
        betas,
        alphas,
        alpha_bars,
    })
}

fn linear_betas(horizon: usize, beta_min: f64, beta_max: f64) -> Vec<f64> {
    if horizon == 1 {
        return vec![beta_min];
    }
    let step = (beta_max - beta_min) / (horizon - 1) as f64;
    (0..horizon).map(|i| beta_min + step * i as f64).collect()
}

fn cosine_betas(horizon: usize) -> Vec<f64> {
    let s = 0.008;
    let f = |t: f64| (((t / horizon as f64 + s) / (1.0 + s)) * std::f64::consts::FRAC_PI_2)
        .cos()
        .powi(2);
    let f0 = f(0.0);
    (1..=horizon)
        .map(|t| {
            let beta = 1.0 - f(t as f64) / f((t - 1) as f64);
            debug_assert!(f0 > 0.0);
            beta.min(COSINE_BETA_CLIP)
        })
        .collect()
}

impl Schedule {
    /// Cumulative signal-retention factor ᾱ_t; `alpha_bar(0) == 1`.
    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t > self.horizon {
            return Err(Error::TimestepOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(self.alpha_bars[t])
    }

    /// α_t = 1 − β_t for t >= 1; α_0 is the empty product 1 so the re-noise
    /// coefficient is total in t.
    pub fn alpha(&self, t: usize) -> Result<f64> {
        if t > self.horizon {
            return Err(Error::TimestepOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        Ok(if t == 0 { 1.0 } else { self.alphas[t - 1] })
    }

    /// Strictly decreasing index sequence from T down to 0 with S+1 entries,
    /// evenly spaced by rounding. Used for few-step sampling.
    pub fn sampling_timesteps(&self, steps: usize) -> Result<Vec<usize>> {
        if steps == 0 || steps > self.horizon {
            return Err(Error::InvalidArgument(format!(
                "sampling steps {} out of range [1, {}]",
                steps, self.horizon
            )));
        }
        let t = self.horizon as f64;
        let s = steps as f64;
        Ok((0..=steps)
            .rev()
            .map(|j| (t * j as f64 / s).round() as usize)
            .collect())
    }

    /// Validity check used when loading schedules from checkpoints.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0
            || self.betas.len() != self.horizon
            || self.alphas.len() != self.horizon
            || self.alpha_bars.len() != self.horizon + 1
        {
            return Err(Error::InvalidSchedule("inconsistent table lengths".into()));
        }
        if self.alpha_bars[0] != 1.0 {
            return Err(Error::InvalidSchedule("alpha_bar(0) != 1".into()));
        }
        for t in 1..=self.horizon {
            let beta = self.betas[t - 1];
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::InvalidSchedule(format!("beta_{t} = {beta} outside (0,1)")));
            }
            if self.alpha_bars[t] >= self.alpha_bars[t - 1] {
                return Err(Error::InvalidSchedule(format!("alpha_bar not decreasing at t = {t}")));
            }
            let resid = (self.alpha_bars[t] - self.alpha_bars[t - 1] * self.alphas[t - 1]).abs();
            if resid > 8.0 * f64::EPSILON * self.alpha_bars[t] {
                return Err(Error::InvalidSchedule(format!("telescoping broken at t = {t}")));
            }
        }
        Ok(())
    }
}

pub fn default_schedule() -> Schedule {
    build_schedule(ScheduleKind::Linear, DEFAULT_T, DEFAULT_BETA_MIN, DEFAULT_BETA_MAX)
        .expect("default schedule parameters are valid")
}
