use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{check_state, log_normalise, Backend, LogitMatrix};
use crate::diffusion::SequenceState;
use crate::math::log_softmax_in_place;
use crate::{Error, Result};

/// Increment law between consecutive steps:
/// `ε_{jℓ} = μ_j + √ρ Z_j + √(σ² - ρ) W_{jℓ}` with `μ_j = μ̄ (2j/(V-1) - 1)`.
///
/// `Z_j` is shared across positions, so two positions' increments for the same
/// token have covariance `ρ` and each has variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    pub mu_bar: f64,
    pub sigma: f64,
    pub rho: f64,
}

impl DriftParams {
    pub fn still() -> Self {
        Self {
            mu_bar: 0.0,
            sigma: 0.0,
            rho: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let var = self.sigma * self.sigma;
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::config(format!("drift σ = {} must be finite and ≥ 0", self.sigma)));
        }
        if !self.mu_bar.is_finite() {
            return Err(Error::config("drift μ̄ must be finite"));
        }
        if !(self.rho >= 0.0 && self.rho <= var) {
            return Err(Error::config(format!(
                "drift ρ = {} must lie in [0, σ² = {var}]",
                self.rho
            )));
        }
        Ok(())
    }

    /// No drift and no noise: rows never change.
    pub fn is_still(&self) -> bool {
        self.mu_bar == 0.0 && self.sigma == 0.0
    }

    /// Mean increment of token `j` in a vocabulary of `vocab`.
    pub fn mean(&self, j: usize, vocab: usize) -> f64 {
        self.mu_bar * (2.0 * j as f64 / (vocab - 1) as f64 - 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct DriftingBackend {
    params: DriftParams,
    vocab: usize,
    raw: Vec<f64>,
    shared: Vec<f64>,
    matrix: LogitMatrix,
    started: bool,
}

impl DriftingBackend {
    pub fn new(probs: &[f64], params: DriftParams, len: usize) -> Result<Self> {
        params.validate()?;
        let base = log_normalise(probs)?;
        if base.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("drifting backend needs a strictly positive base distribution"));
        }
        let matrix = LogitMatrix::broadcast(len, &base);
        Ok(Self {
            params,
            vocab: base.len(),
            raw: matrix.values().to_vec(),
            shared: alloc::vec![0.0; base.len()],
            matrix,
            started: false,
        })
    }

    fn drift(&mut self, rng: &mut dyn RngCore) {
        let v = self.vocab;
        let len = self.matrix.len();
        let var = self.params.sigma * self.params.sigma;
        let shared_sd = self.params.rho.sqrt();
        let own_sd = (var - self.params.rho).max(0.0).sqrt();
        for (j, z) in self.shared.iter_mut().enumerate() {
            let mut e = self.params.mean(j, v);
            if shared_sd > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                e += shared_sd * n;
            }
            *z = e;
        }
        for pos in 0..len {
            let row = &mut self.raw[pos * v..(pos + 1) * v];
            for (j, x) in row.iter_mut().enumerate() {
                let mut e = self.shared[j];
                if own_sd > 0.0 {
                    let n: f64 = rng.sample(StandardNormal);
                    e += own_sd * n;
                }
                *x += e;
            }
            let out = self.matrix.row_mut(pos);
            out.copy_from_slice(row);
            log_softmax_in_place(out);
        }
    }
}

impl Backend for DriftingBackend {
    fn vocab(&self) -> usize {
        self.vocab
    }

    fn seq_len(&self) -> usize {
        self.matrix.len()
    }

    fn logits(&mut self, state: &SequenceState, rng: &mut dyn RngCore) -> Result<&LogitMatrix> {
        check_state(state, self.matrix.len(), self.vocab)?;
        if self.started && !self.params.is_still() {
            self.drift(rng);
        }
        self.started = true;
        self.matrix.set_masks_from(state);
        Ok(&self.matrix)
    }
}
