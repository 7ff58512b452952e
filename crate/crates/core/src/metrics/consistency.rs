use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::backends::LogitTrace;
use crate::math::KahanSum;
use crate::{Error, Result};

/// How closely consecutive-step log-probabilities follow a drift-plus-Gaussian law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// Residual standard deviation per consecutive-step pair, in trace order.
    pub sigma_t: Vec<f64>,
    /// Pooled residual standard deviation.
    pub sigma: f64,
    /// Mean increment over everything.
    pub mean_drift: f64,
    /// Largest absolute per-token mean increment.
    pub max_token_drift: f64,
    /// Mean off-diagonal covariance of residuals across positions.
    pub rho: f64,
    /// Excess kurtosis of pooled residuals.
    pub kurtosis: f64,
    pub increments: usize,
}

impl ConsistencyReport {
    pub fn drift_within(&self, mu_bar: f64) -> bool {
        self.max_token_drift <= mu_bar
    }

    pub fn is_zero(&self) -> bool {
        self.sigma == 0.0
            && self.rho == 0.0
            && self.mean_drift == 0.0
            && self.kurtosis == 0.0
            && self.sigma_t.iter().all(|s| *s == 0.0)
    }
}

/// Increment statistics over positions masked at both of two consecutive steps.
///
/// Increments `ε = logp_t - logp_{t+1}` are centred by their mean across traces
/// for each (step, token, position) cell; the residual spread gives `σ_t`, and
/// products of residuals at different positions (same trace, step and token) give `ρ̄`.
/// Both use the `1 - 1/n` correction for the removed cell mean.
pub fn temporal_consistency(traces: &[LogitTrace]) -> Result<ConsistencyReport> {
    let first = traces
        .first()
        .ok_or_else(|| Error::Analysis("no traces given".into()))?;
    let (v, len) = (first.vocab(), first.seq_len());
    let frames = first.frames().len();
    if frames < 2 {
        return Err(Error::Analysis("need at least two consecutive steps".into()));
    }
    for (i, tr) in traces.iter().enumerate() {
        if tr.vocab() != v || tr.seq_len() != len || tr.frames().len() != frames {
            return Err(Error::Analysis(format!("trace {i} has a different shape")));
        }
        for (k, w) in tr.frames().windows(2).enumerate() {
            if w[0].t != w[1].t + 1 || w[0].t != first.frames()[k].t {
                return Err(Error::Analysis(format!(
                    "trace {i} frames {k} and {} are not consecutive steps",
                    k + 1
                )));
            }
        }
    }
    let pairs = frames - 1;
    let cell = |k: usize, pos: usize, j: usize| (k * len + pos) * v + j;
    let shared = |tr: &LogitTrace, k: usize, pos: usize| {
        tr.frames()[k].matrix.is_masked(pos) && tr.frames()[k + 1].matrix.is_masked(pos)
    };
    let increment = |tr: &LogitTrace, k: usize, pos: usize, j: usize| {
        tr.frames()[k + 1].matrix.row(pos)[j] - tr.frames()[k].matrix.row(pos)[j]
    };

    let mut sums = vec![0.0; pairs * len * v];
    let mut counts = vec![0usize; pairs * len * v];
    let mut total = KahanSum::new();
    let mut token_sum = vec![0.0; v];
    let mut token_n = vec![0usize; v];
    for tr in traces {
        for k in 0..pairs {
            for pos in 0..len {
                if !shared(tr, k, pos) {
                    continue;
                }
                for j in 0..v {
                    let e = increment(tr, k, pos, j);
                    if !e.is_finite() {
                        return Err(Error::Analysis(format!(
                            "non-finite increment at step pair {k}, position {pos}, token {j}"
                        )));
                    }
                    sums[cell(k, pos, j)] += e;
                    counts[cell(k, pos, j)] += 1;
                    total.add(e);
                    token_sum[j] += e;
                    token_n[j] += 1;
                }
            }
        }
    }
    let n_total: usize = counts.iter().sum();
    if n_total == 0 {
        return Err(Error::Analysis("no position stays masked across consecutive steps".into()));
    }

    let mut sq_step = vec![0.0; pairs];
    let mut dof_step = vec![0.0; pairs];
    let mut sq = KahanSum::new();
    let mut quad = KahanSum::new();
    let mut dof = 0.0;
    let mut resid_n = 0usize;
    let mut cross = KahanSum::new();
    let mut cross_weight = 0.0;
    let mut group = Vec::with_capacity(len);
    for tr in traces {
        for k in 0..pairs {
            for j in 0..v {
                group.clear();
                let mut w_sum = 0.0;
                for pos in 0..len {
                    let c = cell(k, pos, j);
                    let n = counts[c];
                    if n < 2 || !shared(tr, k, pos) {
                        continue;
                    }
                    let r = increment(tr, k, pos, j) - sums[c] / n as f64;
                    let w = 1.0 - 1.0 / n as f64;
                    sq_step[k] += r * r;
                    dof_step[k] += w;
                    sq.add(r * r);
                    quad.add(r * r * r * r);
                    dof += w;
                    resid_n += 1;
                    group.push(r);
                    w_sum += w;
                }
                let m = group.len();
                if m >= 2 {
                    let s: f64 = group.iter().sum();
                    let s2: f64 = group.iter().map(|r| r * r).sum();
                    cross.add(s * s - s2);
                    cross_weight += (m * (m - 1)) as f64 * (w_sum / m as f64);
                }
            }
        }
    }
    if resid_n == 0 {
        return Err(Error::Analysis("every cell was seen in only one trace".into()));
    }

    let sigma_t = sq_step
        .iter()
        .zip(&dof_step)
        .map(|(&s, &d)| if d > 0.0 { (s / d).sqrt() } else { 0.0 })
        .collect();
    let var = sq.value() / dof;
    let m2 = sq.value() / resid_n as f64;
    let m4 = quad.value() / resid_n as f64;
    let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
    let rho = if cross_weight > 0.0 {
        cross.value() / cross_weight
    } else {
        0.0
    };
    let max_token_drift = token_sum
        .iter()
        .zip(&token_n)
        .filter(|(_, &n)| n > 0)
        .map(|(&s, &n)| (s / n as f64).abs())
        .fold(0.0, f64::max);
    Ok(ConsistencyReport {
        sigma_t,
        sigma: var.sqrt(),
        mean_drift: total.value() / n_total as f64,
        max_token_drift,
        rho,
        kurtosis,
        increments: n_total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::{DriftParams, DriftingBackend, Recorder};
    use crate::diffusion::{run_reverse, ChainRng, RunConfig};

    fn record(params: DriftParams, seed: u64) -> LogitTrace {
        let b = DriftingBackend::new(&[0.1, 0.2, 0.3, 0.4], params, 6).unwrap();
        let mut rec = Recorder::new(b);
        let cfg = RunConfig::new(6, 5).unwrap();
        run_reverse(&mut rec, &[], &cfg, &mut ChainRng::new(seed)).unwrap();
        rec.into_trace()
    }

    #[test]
    fn still_backend_gives_zero_report() {
        let traces: Vec<_> = (0..5).map(|s| record(DriftParams::still(), s)).collect();
        let r = temporal_consistency(&traces).unwrap();
        assert!(r.is_zero(), "{r:?}");
    }

    #[test]
    fn needs_two_steps() {
        let t = LogitTrace::new(2, 2);
        assert!(matches!(temporal_consistency(&[t]), Err(Error::Analysis(_))));
        assert!(temporal_consistency(&[]).is_err());
    }
}
