//! Log-probability sources. All backends emit a full `L × V` matrix every step;
//! rows for committed positions are flagged and ignored by the sampler.

mod drifting;
mod replay;
mod synthetic;

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::RngCore;
use serde::{Deserialize, Serialize};

pub use drifting::{DriftParams, DriftingBackend};
pub use replay::{LogitTrace, Recorder, ReplayBackend, TraceFrame};
pub use synthetic::{MarkovBackend, UnigramBackend};

use crate::diffusion::SequenceState;
use crate::math::log_sum_exp;
use crate::{Error, Result};

/// Row-major `len × vocab` natural-log probabilities plus per-position mask flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitMatrix {
    len: usize,
    vocab: usize,
    values: Vec<f64>,
    masked: Vec<bool>,
}

impl LogitMatrix {
    /// All positions start flagged as masked.
    pub fn from_rows(len: usize, vocab: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != len * vocab {
            return Err(Error::config(format!(
                "logit matrix needs {} values, got {}",
                len * vocab,
                values.len()
            )));
        }
        Ok(Self {
            len,
            vocab,
            values,
            masked: vec![true; len],
        })
    }

    /// Same row at every position.
    pub fn broadcast(len: usize, row: &[f64]) -> Self {
        let mut values = Vec::with_capacity(len * row.len());
        for _ in 0..len {
            values.extend_from_slice(row);
        }
        Self {
            len,
            vocab: row.len(),
            values,
            masked: vec![true; len],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        &self.values[pos * self.vocab..(pos + 1) * self.vocab]
    }

    pub fn row_mut(&mut self, pos: usize) -> &mut [f64] {
        &mut self.values[pos * self.vocab..(pos + 1) * self.vocab]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_masked(&self, pos: usize) -> bool {
        self.masked[pos]
    }

    pub fn masked_flags(&self) -> &[bool] {
        &self.masked
    }

    pub fn set_masked(&mut self, pos: usize, masked: bool) {
        self.masked[pos] = masked;
    }

    pub fn set_masks_from(&mut self, state: &SequenceState) {
        for (pos, m) in self.masked.iter_mut().enumerate() {
            *m = state.is_masked(pos);
        }
    }

    /// Checks every row's exponentials sum to one within `tol`.
    pub fn check_normalised(&self, tol: f64) -> Result<()> {
        for pos in 0..self.len {
            let lse = log_sum_exp(self.row(pos));
            let total = lse.exp();
            if !((total - 1.0).abs() <= tol) {
                return Err(Error::Contract(format!(
                    "logit row {pos} sums to {total} after exponentiation"
                )));
            }
        }
        Ok(())
    }

    /// Finite minimum and maximum log-probability.
    pub fn finite_range(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.values {
            if v.is_finite() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo <= hi).then_some((lo, hi))
    }
}

/// A per-chain source of log-probabilities. Implementations may keep state
/// across calls (the drifting family does), so each chain owns its own instance.
pub trait Backend {
    fn vocab(&self) -> usize;

    fn seq_len(&self) -> usize;

    /// Rows for reverse step `state.step - 1`, given the partially masked `state`.
    ///
    /// `rng` is the chain's backend stream; deterministic backends ignore it.
    fn logits(&mut self, state: &SequenceState, rng: &mut dyn RngCore) -> Result<&LogitMatrix>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn vocab(&self) -> usize {
        (**self).vocab()
    }

    fn seq_len(&self) -> usize {
        (**self).seq_len()
    }

    fn logits(&mut self, state: &SequenceState, rng: &mut dyn RngCore) -> Result<&LogitMatrix> {
        (**self).logits(state, rng)
    }
}

/// Serializable description of a backend family; [`build`](Self::build) makes a fresh instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Independent positions with one shared distribution.
    Unigram { probs: Vec<f64> },
    /// First-order chain conditioned on the nearest committed left neighbour.
    Markov {
        initial: Vec<f64>,
        transitions: Vec<Vec<f64>>,
    },
    /// Unigram start whose logits drift between steps.
    Drifting {
        probs: Vec<f64>,
        /// Bound on the per-token mean increment.
        mu_bar: f64,
        sigma: f64,
        /// Cross-position covariance of increments, `0 ≤ ρ ≤ σ²`.
        rho: f64,
    },
    /// Recorded rows replayed by step.
    #[serde(skip)]
    Trace(Arc<LogitTrace>),
}

impl BackendSpec {
    pub fn vocab(&self) -> usize {
        match self {
            BackendSpec::Unigram { probs } | BackendSpec::Drifting { probs, .. } => probs.len(),
            BackendSpec::Markov { initial, .. } => initial.len(),
            BackendSpec::Trace(t) => t.vocab(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            BackendSpec::Unigram { .. } => "unigram",
            BackendSpec::Markov { .. } => "markov",
            BackendSpec::Drifting { .. } => "drifting",
            BackendSpec::Trace(_) => "trace",
        }
    }

    pub fn build(&self, len: usize) -> Result<Box<dyn Backend + Send>> {
        Ok(match self {
            BackendSpec::Unigram { probs } => Box::new(UnigramBackend::new(probs, len)?),
            BackendSpec::Markov {
                initial,
                transitions,
            } => Box::new(MarkovBackend::new(initial, transitions, len)?),
            BackendSpec::Drifting {
                probs,
                mu_bar,
                sigma,
                rho,
            } => {
                let drift = DriftParams {
                    mu_bar: *mu_bar,
                    sigma: *sigma,
                    rho: *rho,
                };
                Box::new(DriftingBackend::new(probs, drift, len)?)
            }
            BackendSpec::Trace(trace) => {
                if trace.seq_len() != len {
                    return Err(Error::Replay(format!(
                        "trace covers {} positions, run needs {len}",
                        trace.seq_len()
                    )));
                }
                Box::new(ReplayBackend::new(trace.clone()))
            }
        })
    }

    /// Log-probability row of the first (fully masked) step at position 0, where defined.
    pub fn base_log_probs(&self) -> Result<Vec<f64>> {
        match self {
            BackendSpec::Unigram { probs } | BackendSpec::Drifting { probs, .. } => {
                log_normalise(probs)
            }
            BackendSpec::Markov { initial, .. } => log_normalise(initial),
            BackendSpec::Trace(t) => t
                .frames()
                .first()
                .map(|f| f.matrix.row(0).to_vec())
                .ok_or_else(|| Error::Replay("trace has no frames".into())),
        }
    }
}

/// Turns non-negative weights into log-probabilities.
pub fn log_normalise(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.len() < 2 {
        return Err(Error::config("distribution needs at least two tokens"));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::config("distribution weights must be finite and ≥ 0"));
    }
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptySupport);
    }
    Ok(weights.iter().map(|w| (w / total).ln()).collect())
}

/// `p_j ∝ (j + 1)^{-s}`.
pub fn zipf_probs(vocab: usize, exponent: f64) -> Vec<f64> {
    let w: Vec<f64> = (0..vocab)
        .map(|j| (j as f64 + 1.0).powf(-exponent))
        .collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn uniform_probs(vocab: usize) -> Vec<f64> {
    vec![1.0 / vocab as f64; vocab]
}

fn check_state(state: &SequenceState, len: usize, vocab: usize) -> Result<()> {
    if state.len() != len || state.vocab().size() != vocab {
        return Err(Error::config(format!(
            "state has shape {}×{}, backend expects {len}×{vocab}",
            state.len(),
            state.vocab().size()
        )));
    }
    Ok(())
}
