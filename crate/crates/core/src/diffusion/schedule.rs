use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Shape of the masking schedule `α_t` (the probability that a token is revealed at step `t`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `α_t = 1 - t/T`.
    Linear,
    /// Masked fraction `1 - α_t = (γ^t - 1) / (γ^T - 1)`, `γ > 0`, `γ ≠ 1`.
    Geometric { ratio: f64 },
    /// Explicit `α_0..=α_T`.
    Custom { alphas: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskSchedule {
    pub kind: ScheduleKind,
    pub steps: usize,
}

impl MaskSchedule {
    pub fn linear(steps: usize) -> Result<Self> {
        Self::new(ScheduleKind::Linear, steps)
    }

    pub fn new(kind: ScheduleKind, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("schedule needs at least one step"));
        }
        match &kind {
            ScheduleKind::Linear => {}
            ScheduleKind::Geometric { ratio } => {
                if !(ratio.is_finite() && *ratio > 0.0) || *ratio == 1.0 {
                    return Err(Error::config(format!("geometric ratio {ratio} must be > 0 and != 1")));
                }
            }
            ScheduleKind::Custom { alphas } => {
                if alphas.len() != steps + 1 {
                    return Err(Error::config(format!(
                        "custom schedule needs {} values, got {}",
                        steps + 1,
                        alphas.len()
                    )));
                }
                if alphas[0] != 1.0 || alphas[steps] != 0.0 {
                    return Err(Error::config("custom schedule must have α_0 = 1 and α_T = 0"));
                }
                if alphas.windows(2).any(|w| !(w[0] > w[1])) {
                    return Err(Error::config(
                        "custom schedule must be strictly increasing as t decreases",
                    ));
                }
            }
        }
        Ok(Self { kind, steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `α_t`, the revealed fraction at reverse step `t ∈ [0, T]`.
    pub fn alpha(&self, t: usize) -> Result<f64> {
        if t > self.steps {
            return Err(Error::Range {
                what: "step",
                value: t,
                max: self.steps,
            });
        }
        let big_t = self.steps;
        Ok(match &self.kind {
            ScheduleKind::Linear => {
                if t == 0 {
                    1.0
                } else if t == big_t {
                    0.0
                } else {
                    1.0 - t as f64 / big_t as f64
                }
            }
            ScheduleKind::Geometric { ratio } => {
                if t == 0 {
                    1.0
                } else if t == big_t {
                    0.0
                } else {
                    let masked = (ratio.powi(t as i32) - 1.0) / (ratio.powi(big_t as i32) - 1.0);
                    1.0 - masked
                }
            }
            ScheduleKind::Custom { alphas } => alphas[t],
        })
    }

    /// Probability that a position still masked at `t + 1` is revealed at `t`:
    /// `(α_t - α_{t+1}) / (1 - α_{t+1})`.
    pub fn unmask_probability(&self, t: usize) -> Result<f64> {
        if t >= self.steps {
            return Err(Error::Range {
                what: "step",
                value: t,
                max: self.steps - 1,
            });
        }
        let a_t = self.alpha(t)?;
        let a_next = self.alpha(t + 1)?;
        if t == 0 {
            return Ok(1.0);
        }
        Ok(((a_t - a_next) / (1.0 - a_next)).clamp(0.0, 1.0))
    }
}

/// Free-function form of [`MaskSchedule::alpha`].
pub fn schedule_alpha(t: usize, schedule: &MaskSchedule) -> Result<f64> {
    schedule.alpha(t)
}
