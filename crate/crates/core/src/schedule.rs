//! Weighting of the attention term against the answer loss.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("t_max must be at least 1")]
    ZeroTMax,
    #[error("fixed alpha must lie in [0, 1], got {0}")]
    FixedOutOfRange(f64),
    #[error("non-finite loss input: {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AlphaMode {
    CosineDecay,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    t_max: u64,
    mode: AlphaMode,
}

/// Weight at one step, flagged when the step lies past `t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaStep {
    pub value: f64,
    pub past_end: bool,
}

impl Schedule {
    pub fn new(t_max: u64, mode: AlphaMode) -> Result<Self, ScheduleError> {
        if t_max == 0 {
            return Err(ScheduleError::ZeroTMax);
        }
        if let AlphaMode::Fixed(v) = mode {
            if !(0.0..=1.0).contains(&v) {
                return Err(ScheduleError::FixedOutOfRange(v));
            }
        }
        Ok(Schedule { t_max, mode })
    }

    pub fn cosine(t_max: u64) -> Result<Self, ScheduleError> {
        Schedule::new(t_max, AlphaMode::CosineDecay)
    }

    pub fn fixed(value: f64) -> Result<Self, ScheduleError> {
        Schedule::new(1, AlphaMode::Fixed(value))
    }

    pub fn t_max(&self) -> u64 {
        self.t_max
    }

    pub fn mode(&self) -> AlphaMode {
        self.mode
    }

    /// `0.5·(1 + cos(π·t/t_max))` for cosine decay; zero once decay is done.
    pub fn alpha_at(&self, t: u64) -> AlphaStep {
        let past_end = t > self.t_max;
        let value = match self.mode {
            AlphaMode::Fixed(v) => v,
            AlphaMode::CosineDecay if past_end => 0.0,
            AlphaMode::CosineDecay => {
                let v = 0.5 * (1.0 + (PI * t as f64 / self.t_max as f64).cos());
                v.clamp(0.0, 1.0)
            }
        };
        AlphaStep { value, past_end }
    }

    pub fn alpha(&self, t: u64) -> f64 {
        self.alpha_at(t).value
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub kl: f64,
    pub alpha: f64,
    pub total: f64,
}

/// `ce + alpha(t)·kl`; without an attention target the weight is zero.
pub fn total_loss(ce: f64, kl: Option<f64>, s: &Schedule, t: u64) -> Result<LossBreakdown, ScheduleError> {
    if !ce.is_finite() {
        return Err(ScheduleError::NonFinite("ce"));
    }
    match kl {
        None => Ok(LossBreakdown {
            ce,
            kl: 0.0,
            alpha: 0.0,
            total: ce,
        }),
        Some(kl) if !kl.is_finite() => Err(ScheduleError::NonFinite("kl")),
        Some(kl) => {
            let alpha = s.alpha(t);
            Ok(LossBreakdown {
                ce,
                kl,
                alpha,
                total: ce + alpha * kl,
            })
        }
    }
}
