use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::math::{kahan_sum, log_sum_exp};
use crate::{Error, Result};

const EXPECTATION_TOL: f64 = 1e-10;
const MAX_ITERS: usize = 200;
const LAMBDA_CEILING: f64 = 1e8;

/// KL projection of `q` onto `{r : E_r[B] ≥ R}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltSolution {
    pub lambda: f64,
    pub probs: Vec<f64>,
    pub expectation: f64,
    /// `KL(r ‖ q)` in nats.
    pub kl: f64,
    pub iterations: usize,
}

/// `r_λ(x) ∝ q(x) e^{λ B(x)}` with its expectation and `KL(r_λ ‖ q)`.
pub fn tilt_at(q: &[f64], totals: &[f64], lambda: f64) -> (Vec<f64>, f64, f64) {
    let logw: Vec<f64> = q
        .iter()
        .zip(totals)
        .map(|(&p, &b)| if p > 0.0 { p.ln() + lambda * b } else { f64::NEG_INFINITY })
        .collect();
    let log_z = log_sum_exp(&logw);
    let r: Vec<f64> = logw.iter().map(|&w| (w - log_z).exp()).collect();
    let expectation = kahan_sum(r.iter().zip(totals).map(|(&p, &b)| p * b));
    // KL = λ E_r[B] - ln Z, with q normalised.
    let kl = (lambda * expectation - log_z).max(0.0);
    (r, expectation, kl)
}

/// Solves `E_{r_λ}[B] = R` by bisection when the constraint is active.
///
/// `q` must be a distribution over the enumerated sequences and `totals[i]` the
/// contribution of sequence `i`.
pub fn exact_tilt_projection(q: &[f64], totals: &[f64], target: f64) -> Result<TiltSolution> {
    if q.len() != totals.len() || q.is_empty() {
        return Err(Error::config("distribution and contribution tables differ in length"));
    }
    let mass = kahan_sum(q.iter().copied());
    if q.iter().any(|p| !(*p >= 0.0)) || (mass - 1.0).abs() > 1e-9 {
        return Err(Error::config("q must be a probability distribution"));
    }
    let max_b = q
        .iter()
        .zip(totals)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, &b)| b)
        .fold(f64::NEG_INFINITY, f64::max);
    let base = kahan_sum(q.iter().zip(totals).map(|(&p, &b)| p * b));
    if base >= target {
        return Ok(TiltSolution {
            lambda: 0.0,
            probs: q.to_vec(),
            expectation: base,
            kl: 0.0,
            iterations: 0,
        });
    }
    if max_b < target {
        return Err(Error::Infeasible {
            max: max_b,
            target,
        });
    }
    if max_b == target {
        // Only the point mass on the maximisers reaches R; that is the λ → ∞ limit.
        let on_top: f64 = q.iter().zip(totals).filter(|(_, &b)| b == max_b).map(|(p, _)| p).sum();
        let probs: Vec<f64> = q
            .iter()
            .zip(totals)
            .map(|(&p, &b)| if b == max_b { p / on_top } else { 0.0 })
            .collect();
        return Ok(TiltSolution {
            lambda: f64::INFINITY,
            probs,
            expectation: max_b,
            kl: -on_top.ln(),
            iterations: 0,
        });
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    while tilt_at(q, totals, hi).1 < target {
        hi *= 2.0;
        if hi > LAMBDA_CEILING {
            return Err(Error::Domain("tilt multiplier diverged".into()));
        }
    }
    let mut best = tilt_at(q, totals, hi);
    let mut lambda = hi;
    let mut iterations = 0;
    for i in 0..MAX_ITERS {
        iterations = i + 1;
        let mid = 0.5 * (lo + hi);
        let cur = tilt_at(q, totals, mid);
        if (cur.1 - target).abs() <= EXPECTATION_TOL {
            lambda = mid;
            best = cur;
            break;
        }
        if cur.1 < target {
            lo = mid;
        } else {
            hi = mid;
            lambda = mid;
            best = cur;
        }
    }
    let (probs, expectation, kl) = best;
    Ok(TiltSolution {
        lambda,
        probs,
        expectation,
        kl,
        iterations,
    })
}
