//! Logit tilt, multiplier updates, slack regimes and the per-chain dual state.

mod bias;
mod multiplier;
mod slack;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use bias::{apply_bias, compose_constraints, static_bias, unbiased};
pub(crate) use bias::{add_tilt, normalise};
pub use multiplier::{multiplicative_step, update_multiplier};
pub use slack::{
    compute_slack, expected_future_contribution, optimistic_prediction, slack_increment,
    Prediction, SlackInputs, SlackMode,
};

use crate::scorers::{ScoreSource, ScoreTable};
use crate::{Error, Result};

pub const DEFAULT_LAMBDA_MAX: f64 = 1e3;
pub const DEFAULT_LAMBDA0: f64 = 0.5;
pub const DEFAULT_ETA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplierScope {
    #[default]
    Scalar,
    /// One multiplier per position, each driven only by its own commit.
    PerPosition,
}

impl core::str::FromStr for MultiplierScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(MultiplierScope::Scalar),
            "per_position" | "per-position" => Ok(MultiplierScope::PerPosition),
            other => Err(Error::config(format!("unknown multiplier scope '{other}'"))),
        }
    }
}

/// An at-least constraint `E[Σ_ℓ b_{ℓ,x_ℓ}] ≥ R` with its guidance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub scores: ScoreSource,
    pub target: f64,
    pub eta: f64,
    pub lambda0: f64,
    pub lambda_max: f64,
    pub slack_mode: SlackMode,
    pub scope: MultiplierScope,
    /// Divide `η` by the score range. `None` turns it on when several constraints are active.
    pub rescale: Option<bool>,
}

impl Constraint {
    pub fn new(name: impl Into<String>, scores: impl Into<ScoreSource>, target: f64) -> Self {
        Self {
            name: name.into(),
            scores: scores.into(),
            target,
            eta: DEFAULT_ETA,
            lambda0: DEFAULT_LAMBDA0,
            lambda_max: DEFAULT_LAMBDA_MAX,
            slack_mode: SlackMode::Accumulated,
            scope: MultiplierScope::Scalar,
            rescale: None,
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_lambda0(mut self, lambda0: f64) -> Self {
        self.lambda0 = lambda0;
        self
    }

    pub fn with_lambda_max(mut self, lambda_max: f64) -> Self {
        self.lambda_max = lambda_max;
        self
    }

    pub fn with_slack(mut self, mode: SlackMode) -> Self {
        self.slack_mode = mode;
        self
    }

    pub fn with_scope(mut self, scope: MultiplierScope) -> Self {
        self.scope = scope;
        self
    }

    pub fn with_rescale(mut self, rescale: bool) -> Self {
        self.rescale = Some(rescale);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !(self.target.is_finite() && self.target >= 0.0) {
            return Err(Error::config(format!("constraint '{name}': target must be finite and ≥ 0")));
        }
        // η = 0 is allowed: it freezes λ at λ_0 and is what the static comparisons use.
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::config(format!("constraint '{name}': η must be finite and ≥ 0")));
        }
        if !(self.lambda_max > 0.0) || self.lambda_max.is_nan() {
            return Err(Error::config(format!("constraint '{name}': λ_max must be > 0")));
        }
        if !(self.lambda0 >= 0.0 && self.lambda0 <= self.lambda_max) {
            return Err(Error::config(format!(
                "constraint '{name}': λ_0 = {} must lie in [0, λ_max = {}]",
                self.lambda0, self.lambda_max
            )));
        }
        Ok(())
    }

    /// `η / range(b)` when `rescale` holds and the range is positive, `η` otherwise.
    pub fn effective_eta(&self, rescale: bool) -> f64 {
        let range = self.scores.nominal_range();
        if rescale && range > 0.0 {
            self.eta / range
        } else {
            self.eta
        }
    }
}

/// Effective step sizes for a constraint set. Rescaling defaults on for two or more constraints.
pub fn effective_etas(constraints: &[Constraint]) -> Vec<f64> {
    let auto = constraints.len() >= 2;
    constraints
        .iter()
        .map(|c| c.effective_eta(c.rescale.unwrap_or(auto)))
        .collect()
}

/// Checks that all constraints share one vocabulary.
pub fn check_vocabularies(constraints: &[Constraint]) -> Result<()> {
    if let Some(first) = constraints.first() {
        let v = first.scores.vocab_size();
        for c in &constraints[1..] {
            if c.scores.vocab_size() != v {
                return Err(Error::config(format!(
                    "constraint '{}' has vocabulary {} but '{}' has {v}",
                    c.name,
                    c.scores.vocab_size(),
                    first.name
                )));
            }
        }
    }
    Ok(())
}

/// Dual state of one constraint inside one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceState {
    mode: SlackMode,
    scope: MultiplierScope,
    target: f64,
    lambda0: f64,
    lambda_max: f64,
    eta: f64,
    len: usize,
    lambda: Vec<f64>,
    slack: Vec<f64>,
    accumulated: Vec<f64>,
    committed_value: Vec<f64>,
    committed: Vec<bool>,
    prediction_prev: Vec<f64>,
}

/// What the multiplier update sees after a step's commits are recorded.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// Positions still masked after the step.
    pub masked: usize,
    /// Per-position expected contribution of still-masked positions (optimistic mode).
    pub expected_future: Option<&'a [f64]>,
}

impl GuidanceState {
    pub fn new(constraint: &Constraint, len: usize, eta_eff: f64) -> Result<Self> {
        constraint.validate()?;
        if len == 0 {
            return Err(Error::config("sequence length must be ≥ 1"));
        }
        let n = match constraint.scope {
            MultiplierScope::Scalar => 1,
            MultiplierScope::PerPosition => len,
        };
        Ok(Self {
            mode: constraint.slack_mode,
            scope: constraint.scope,
            target: constraint.target,
            lambda0: constraint.lambda0,
            lambda_max: constraint.lambda_max,
            eta: eta_eff,
            len,
            lambda: vec![constraint.lambda0; n],
            slack: vec![0.0; n],
            accumulated: vec![0.0; n],
            committed_value: vec![0.0; len],
            committed: vec![false; len],
            prediction_prev: vec![0.0; n],
        })
    }

    pub fn scope(&self) -> MultiplierScope {
        self.scope
    }

    pub fn mode(&self) -> SlackMode {
        self.mode
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Multiplier applied at position `pos` for the next sampling step.
    pub fn lambda_at(&self, pos: usize) -> f64 {
        match self.scope {
            MultiplierScope::Scalar => self.lambda[0],
            MultiplierScope::PerPosition => self.lambda[pos],
        }
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// Mean multiplier (the multiplier itself for scalar scope).
    pub fn lambda_summary(&self) -> f64 {
        self.lambda.iter().sum::<f64>() / self.lambda.len() as f64
    }

    /// Slack values last fed to the multiplier update.
    pub fn slack(&self) -> &[f64] {
        &self.slack
    }

    /// Scalar slack, or the sum of per-position slacks.
    pub fn slack_summary(&self) -> f64 {
        self.slack.iter().sum()
    }

    /// Total committed contribution `c`.
    pub fn committed_total(&self) -> f64 {
        self.committed_value.iter().sum()
    }

    /// Records this step's commits and returns `Σ (b - R/L)` over them.
    pub fn record_commits(&mut self, commits: &[(usize, u32)], table: &ScoreTable) -> Result<f64> {
        let share = self.target / self.len as f64;
        let mut delta = 0.0;
        for &(pos, tok) in commits {
            if pos >= self.len {
                return Err(Error::Range {
                    what: "position",
                    value: pos,
                    max: self.len - 1,
                });
            }
            if self.committed[pos] {
                return Err(Error::Invariant(format!("position {pos} committed twice")));
            }
            self.committed[pos] = true;
            let b = table.get(pos, tok);
            self.committed_value[pos] = b;
            let d = b - share;
            delta += d;
            match self.scope {
                MultiplierScope::Scalar => self.accumulated[0] += d,
                MultiplierScope::PerPosition => self.accumulated[pos] += d,
            }
        }
        Ok(delta)
    }

    /// Recomputes slack and multipliers after [`record_commits`](Self::record_commits).
    pub fn update(&mut self, ctx: &StepContext<'_>) -> Result<()> {
        let masked_fraction = ctx.masked as f64 / self.len as f64;
        let unmasked_fraction = 1.0 - masked_fraction;
        if self.mode == SlackMode::Optimistic && ctx.expected_future.is_none() {
            return Err(Error::Contract(
                "optimistic slack needs expected future contributions".into(),
            ));
        }
        let n = self.lambda.len();
        let share = self.target / self.len as f64;
        for i in 0..n {
            let (committed, target, expected) = match self.scope {
                MultiplierScope::Scalar => (
                    self.committed_total(),
                    self.target,
                    ctx.expected_future.map_or(0.0, |e| e.iter().sum()),
                ),
                MultiplierScope::PerPosition => (
                    self.committed_value[i],
                    share,
                    ctx.expected_future.map_or(0.0, |e| e[i]),
                ),
            };
            let prediction = if self.mode == SlackMode::Optimistic {
                optimistic_prediction(committed, expected, target, unmasked_fraction).annealed
            } else {
                0.0
            };
            let inputs = SlackInputs {
                accumulated: self.accumulated[i],
                committed,
                target,
                masked_fraction,
                prediction,
                prev_prediction: self.prediction_prev[i],
            };
            let g = compute_slack(self.mode, &inputs);
            if !g.is_finite() {
                return Err(Error::Invariant(format!("slack became {g}")));
            }
            self.slack[i] = g;
            self.prediction_prev[i] = prediction;
            self.lambda[i] = update_multiplier(self.lambda0, self.eta, g, self.lambda_max);
        }
        Ok(())
    }
}
