use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{SequenceState, Vocabulary};
use crate::{Error, Result};

/// One reverse step `x_{t+1} → x_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    /// `(position, token)` pairs revealed at this step.
    pub commits: Vec<(usize, u32)>,
    /// Multiplier per constraint used to sample this step (mean over positions for per-position scope).
    pub lambda: Vec<f64>,
    /// Slack per constraint after this step's commits (summed over positions for per-position scope).
    pub slack: Vec<f64>,
    /// Empirical per-step reward, when bound tracking is on.
    #[serde(default)]
    pub pi_t: Option<f64>,
    /// Leading-term lower bound on `pi_t`, when bound tracking is on.
    #[serde(default)]
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub vocab: usize,
    pub seq_len: usize,
    pub records: Vec<StepRecord>,
    pub tokens: Vec<u32>,
}

impl RunTrace {
    pub fn steps(&self) -> usize {
        self.records.len()
    }

    pub fn final_state(&self) -> Result<SequenceState> {
        SequenceState::from_tokens(Vocabulary::new(self.vocab)?, self.tokens.clone())
    }

    /// Among steps that committed something and carry both values:
    /// how many have `pi_t ≥ bound`, and how many there are.
    pub fn bound_hits(&self) -> (usize, usize) {
        let mut hit = 0;
        let mut n = 0;
        for r in self.records.iter().filter(|r| !r.commits.is_empty()) {
            if let (Some(p), Some(b)) = (r.pi_t, r.bound) {
                n += 1;
                if p >= b {
                    hit += 1;
                }
            }
        }
        (hit, n)
    }

    /// Checks step order, that commits partition `[0, L)`, and that they agree with the final tokens.
    pub fn validate(&self, steps: usize) -> Result<()> {
        if self.records.len() != steps {
            return Err(Error::Invariant(format!(
                "trace has {} records, expected {steps}",
                self.records.len()
            )));
        }
        let mut seen = vec![false; self.seq_len];
        for (i, r) in self.records.iter().enumerate() {
            if r.t != steps - 1 - i {
                return Err(Error::Invariant(format!("record {i} has step {}", r.t)));
            }
            for &(pos, tok) in &r.commits {
                if pos >= self.seq_len || seen[pos] {
                    return Err(Error::Invariant(format!("position {pos} committed twice or out of range")));
                }
                seen[pos] = true;
                if self.tokens.get(pos) != Some(&tok) {
                    return Err(Error::Invariant(format!(
                        "commit ({pos}, {tok}) disagrees with the final sequence"
                    )));
                }
            }
        }
        if let Some(pos) = seen.iter().position(|s| !s) {
            return Err(Error::Invariant(format!("position {pos} never committed")));
        }
        Ok(())
    }
}
