use alloc::format;
use alloc::vec::Vec;

use rand::RngCore;

use super::{check_state, log_normalise, Backend, LogitMatrix};
use crate::diffusion::SequenceState;
use crate::{Error, Result};

/// Every position gets the same distribution regardless of context.
#[derive(Debug, Clone)]
pub struct UnigramBackend {
    matrix: LogitMatrix,
}

impl UnigramBackend {
    pub fn new(probs: &[f64], len: usize) -> Result<Self> {
        let row = log_normalise(probs)?;
        Ok(Self {
            matrix: LogitMatrix::broadcast(len, &row),
        })
    }
}

impl Backend for UnigramBackend {
    fn vocab(&self) -> usize {
        self.matrix.vocab()
    }

    fn seq_len(&self) -> usize {
        self.matrix.len()
    }

    fn logits(&mut self, state: &SequenceState, _rng: &mut dyn RngCore) -> Result<&LogitMatrix> {
        check_state(state, self.matrix.len(), self.matrix.vocab())?;
        self.matrix.set_masks_from(state);
        Ok(&self.matrix)
    }
}

/// Row at `ℓ` is `transitions[x_k]` for the nearest committed `k < ℓ`, or `initial` if none.
#[derive(Debug, Clone)]
pub struct MarkovBackend {
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
    matrix: LogitMatrix,
}

impl MarkovBackend {
    pub fn new(initial: &[f64], transitions: &[Vec<f64>], len: usize) -> Result<Self> {
        let initial = log_normalise(initial)?;
        let v = initial.len();
        if transitions.len() != v {
            return Err(Error::config(format!(
                "markov backend needs {v} transition rows, got {}",
                transitions.len()
            )));
        }
        let transitions = transitions
            .iter()
            .map(|r| {
                if r.len() != v {
                    return Err(Error::config("transition row length differs from vocabulary"));
                }
                log_normalise(r)
            })
            .collect::<Result<Vec<_>>>()?;
        let matrix = LogitMatrix::broadcast(len, &initial);
        Ok(Self {
            initial,
            transitions,
            matrix,
        })
    }
}

impl Backend for MarkovBackend {
    fn vocab(&self) -> usize {
        self.initial.len()
    }

    fn seq_len(&self) -> usize {
        self.matrix.len()
    }

    fn logits(&mut self, state: &SequenceState, _rng: &mut dyn RngCore) -> Result<&LogitMatrix> {
        check_state(state, self.matrix.len(), self.initial.len())?;
        let mut left: Option<u32> = None;
        for pos in 0..state.len() {
            let src = match left {
                Some(tok) => &self.transitions[tok as usize],
                None => &self.initial,
            };
            self.matrix.row_mut(pos).copy_from_slice(src);
            self.matrix.set_masked(pos, state.is_masked(pos));
            if let Some(tok) = state.get(pos) {
                left = Some(tok);
            }
        }
        Ok(&self.matrix)
    }
}
