use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::backends::LogitMatrix;
use crate::diffusion::RunTrace;
use crate::math::{kahan_sum, log_sum_exp};
use crate::scorers::ScoreTable;
use crate::{Error, Result};

/// Inputs to the closed-form expected-violation bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub eta: f64,
    pub target: f64,
    pub len: usize,
    pub b_max: f64,
    /// `Π_max - Π_min`, the spread of finite base log-probabilities.
    pub width: f64,
}

impl BoundInputs {
    /// Reads `b_max` off the table and the width off the base rows.
    pub fn from_model(eta: f64, target: f64, table: &ScoreTable, base: &LogitMatrix) -> Result<Self> {
        let (lo, hi) = base
            .finite_range()
            .ok_or_else(|| Error::Domain("base rows have no finite entry".into()))?;
        Ok(Self {
            eta,
            target,
            len: base.len(),
            b_max: table.max(),
            width: hi - lo,
        })
    }
}

/// `(1/η) ln[(η + 1)(Π_max - Π_min) / (b_max - R/L)]`.
pub fn statement1_bound(inputs: &BoundInputs) -> Result<f64> {
    let BoundInputs {
        eta,
        target,
        len,
        b_max,
        width,
    } = *inputs;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!("η = {eta} must be finite and > 0")));
    }
    if len == 0 {
        return Err(Error::Domain("sequence length must be ≥ 1".into()));
    }
    let share = target / len as f64;
    if !(b_max > share) {
        return Err(Error::Domain(format!("b_max = {b_max} must exceed R/L = {share}")));
    }
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::Domain(format!("log-probability width {width} must be > 0")));
    }
    Ok(((eta + 1.0) * width / (b_max - share)).ln() / eta)
}

/// One committed position's contribution to the per-step reward and its bound.
///
/// With `e_j` the exponent `Σ_k λ_k (b_{kj} - R_k/L)` and `x` the committed token:
/// reward `= ln Σ_i p_i e^{e_i} - e_x` over the current row, bound the same over
/// the base row. Both rows are re-centred by their own log-partition, so a zero
/// exponent gives exactly 0 on both sides.
pub fn reward_terms(logp: &[f64], prior: &[f64], exponent: &[f64], token: u32) -> (f64, f64) {
    let dual = exponent[token as usize];
    (
        log_partition(logp, exponent) - dual,
        log_partition(prior, exponent) - dual,
    )
}

fn log_partition(row: &[f64], exponent: &[f64]) -> f64 {
    let tilted: Vec<f64> = row.iter().zip(exponent).map(|(&l, &e)| l + e).collect();
    log_sum_exp(&tilted) - log_sum_exp(row)
}

/// Drift and noise parameters for the stochastic correction, with confidence `1 - δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionParams {
    pub mu_bar: f64,
    pub sigma: f64,
    pub rho: f64,
    pub delta: f64,
}

/// Allowance for logit drift between the base rows and step `t`, for `commits` positions:
/// `n [(T - t) μ̄ + √(2 ln(LV/δ) (T - t)(σ² + (T - t - 1) ρ))]`.
pub fn stochastic_correction(
    c: &CorrectionParams,
    commits: usize,
    len: usize,
    vocab: usize,
    steps: usize,
    t: usize,
) -> f64 {
    if commits == 0 {
        return 0.0;
    }
    let span = (steps - t) as f64;
    let log_term = ((len * vocab) as f64 / c.delta).ln();
    let var = c.sigma * c.sigma + (span - 1.0) * c.rho;
    commits as f64 * (span * c.mu_bar + (2.0 * log_term * span * var).max(0.0).sqrt())
}

/// Per-step reward against its lower bound for one or more runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundTrace {
    pub pi: Vec<f64>,
    pub bound: Vec<f64>,
    /// Whether the step committed any position.
    pub active: Vec<bool>,
}

impl BoundTrace {
    pub fn from_run(trace: &RunTrace) -> Result<Self> {
        let mut out = Self::default();
        out.extend(trace)?;
        Ok(out)
    }

    pub fn extend(&mut self, trace: &RunTrace) -> Result<()> {
        for r in &trace.records {
            let (Some(p), Some(b)) = (r.pi_t, r.bound) else {
                return Err(Error::Trace(format!("record for step {} lacks pi_t/bound", r.t)));
            };
            self.pi.push(p);
            self.bound.push(b);
            self.active.push(!r.commits.is_empty());
        }
        Ok(())
    }

    pub fn active_steps(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Fraction of active steps with reward ≥ bound (1 when no step is active).
    pub fn hold_fraction(&self) -> f64 {
        let n = self.active_steps();
        if n == 0 {
            return 1.0;
        }
        let hits = (0..self.pi.len())
            .filter(|&i| self.active[i] && self.pi[i] >= self.bound[i])
            .count();
        hits as f64 / n as f64
    }

    pub fn total_reward(&self) -> f64 {
        kahan_sum(self.pi.iter().copied())
    }

    pub fn total_bound(&self) -> f64 {
        kahan_sum(self.bound.iter().copied())
    }
}
