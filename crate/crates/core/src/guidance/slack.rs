use core::fmt;
use core::str::FromStr;

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::backends::LogitMatrix;
use crate::diffusion::SequenceState;
use crate::scorers::ScoreTable;
use crate::Error;

/// How constraint progress is turned into the signal driving the multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlackMode {
    /// Running `Σ (b - R/L)` over committed tokens.
    Accumulated,
    /// Committed total against the global target, `c - R`.
    Instantaneous,
    /// Instantaneous slack scaled by the masked fraction.
    Early,
    /// Instantaneous slack plus an annealed prediction correction.
    Optimistic,
}

impl SlackMode {
    pub const ALL: [SlackMode; 4] = [
        SlackMode::Accumulated,
        SlackMode::Instantaneous,
        SlackMode::Early,
        SlackMode::Optimistic,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SlackMode::Accumulated => "accumulated",
            SlackMode::Instantaneous => "instantaneous",
            SlackMode::Early => "early",
            SlackMode::Optimistic => "optimistic",
        }
    }
}

impl fmt::Display for SlackMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SlackMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accumulated" => Ok(SlackMode::Accumulated),
            "instantaneous" => Ok(SlackMode::Instantaneous),
            "early" => Ok(SlackMode::Early),
            "optimistic" | "omd" => Ok(SlackMode::Optimistic),
            other => Err(Error::config(format!("unknown slack mode '{other}'"))),
        }
    }
}

/// `Σ_commits (b_{ℓ,x_ℓ} - R/L)` for tokens committed at this step only.
pub fn slack_increment(commit_scores: &[f64], target: f64, len: usize) -> f64 {
    let share = target / len as f64;
    commit_scores.iter().map(|b| b - share).sum()
}

/// Everything a slack regime may look at after a step's commits are recorded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackInputs {
    /// Running `Σ (b - R/L)`.
    pub accumulated: f64,
    /// Total committed contribution `c`.
    pub committed: f64,
    pub target: f64,
    /// Fraction of positions still masked.
    pub masked_fraction: f64,
    /// Annealed prediction `M̃` at this step.
    pub prediction: f64,
    /// Annealed prediction from the previous step.
    pub prev_prediction: f64,
}

pub fn compute_slack(mode: SlackMode, inputs: &SlackInputs) -> f64 {
    let instantaneous = inputs.committed - inputs.target;
    match mode {
        SlackMode::Accumulated => inputs.accumulated,
        SlackMode::Instantaneous => instantaneous,
        SlackMode::Early => instantaneous * inputs.masked_fraction,
        SlackMode::Optimistic => instantaneous - inputs.prediction + inputs.prev_prediction,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Expected remaining shortfall `M = R - (c + Ê)`.
    pub shortfall: f64,
    /// `M̃ = (1 - m̄) M` where `m̄` is the unmasked fraction.
    pub annealed: f64,
}

pub fn optimistic_prediction(
    committed: f64,
    expected_future: f64,
    target: f64,
    unmasked_fraction: f64,
) -> Prediction {
    let shortfall = target - (committed + expected_future);
    Prediction {
        shortfall,
        annealed: (1.0 - unmasked_fraction) * shortfall,
    }
}

/// Per-position `Σ_j p_θ(j) b_{ℓj}` over positions still masked in `state` (0 elsewhere).
pub fn expected_future_contribution(
    logits: &LogitMatrix,
    state: &SequenceState,
    table: &ScoreTable,
) -> Vec<f64> {
    (0..state.len())
        .map(|pos| {
            if !state.is_masked(pos) {
                return 0.0;
            }
            logits
                .row(pos)
                .iter()
                .zip(table.row(pos))
                .map(|(&lp, &b)| if b == 0.0 { 0.0 } else { lp.exp() * b })
                .sum()
        })
        .collect()
}
