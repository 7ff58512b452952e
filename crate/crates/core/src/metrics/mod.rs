//! Constraint satisfaction, fidelity and diversity metrics.

mod consistency;

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::math::kahan_sum;
use crate::scorers::ScoreTable;

pub use consistency::{temporal_consistency, ConsistencyReport};

/// Fraction of totals reaching `target`, with its binomial standard error.
pub fn pass_rate_from_totals(totals: &[f64], target: f64) -> (f64, f64) {
    if totals.is_empty() {
        return (0.0, 0.0);
    }
    let n = totals.len() as f64;
    let p = totals.iter().filter(|&&b| b >= target).count() as f64 / n;
    (p, (p * (1.0 - p) / n).sqrt())
}

pub fn pass_rate(samples: &[Vec<u32>], table: &ScoreTable, target: f64) -> (f64, f64) {
    pass_rate_from_totals(&totals(samples, table), target)
}

pub fn totals(samples: &[Vec<u32>], table: &ScoreTable) -> Vec<f64> {
    samples.iter().map(|s| table.total(s)).collect()
}

/// Mean shortfall `max(0, R - B)`.
pub fn mean_violation(totals: &[f64], target: f64) -> f64 {
    if totals.is_empty() {
        return 0.0;
    }
    kahan_sum(totals.iter().map(|&b| (target - b).max(0.0))) / totals.len() as f64
}

/// Default smoothing `0.5 / N` for a sample set with `N` tokens.
pub fn default_smoothing(tokens: usize) -> f64 {
    if tokens == 0 {
        0.0
    } else {
        0.5 / tokens as f64
    }
}

/// Smoothed unigram frequencies `(f_j + ε) / (1 + V ε)`. Tokens outside `0..vocab` are skipped.
pub fn unigram_frequencies(samples: &[Vec<u32>], vocab: usize, smoothing: Option<f64>) -> Vec<f64> {
    let mut counts = vec![0usize; vocab];
    let mut n = 0usize;
    for s in samples {
        for &t in s {
            if (t as usize) < vocab {
                counts[t as usize] += 1;
                n += 1;
            }
        }
    }
    let eps = smoothing.unwrap_or_else(|| default_smoothing(n));
    let denom = 1.0 + vocab as f64 * eps;
    counts
        .iter()
        .map(|&c| {
            let f = if n == 0 { 0.0 } else { c as f64 / n as f64 };
            (f + eps) / denom
        })
        .collect()
}

/// `KL(P̂ ‖ Q̂)` in nats between smoothed unigram frequencies.
pub fn unigram_kl(p_samples: &[Vec<u32>], q_samples: &[Vec<u32>], vocab: usize, smoothing: Option<f64>) -> f64 {
    let p = unigram_frequencies(p_samples, vocab, smoothing);
    let q = unigram_frequencies(q_samples, vocab, smoothing);
    kl_divergence(&p, &q)
}

/// `Σ p_i ln(p_i / q_i)`; terms with `p_i = 0` vanish.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let kl = kahan_sum(p.iter().zip(q).map(|(&pi, &qi)| {
        if pi == 0.0 {
            0.0
        } else if qi == 0.0 {
            f64::INFINITY
        } else {
            pi * (pi / qi).ln()
        }
    }));
    kl.max(0.0)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * kahan_sum(p.iter().zip(q).map(|(a, b)| (a - b).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistN {
    pub ratio: f64,
    /// Samples shorter than `n`, left out of the ratio.
    pub skipped: usize,
}

/// Distinct over total `n`-grams, pooled over samples.
pub fn dist_n(samples: &[Vec<u32>], n: usize) -> DistN {
    let mut distinct: BTreeSet<&[u32]> = BTreeSet::new();
    let mut total = 0usize;
    let mut skipped = 0;
    for s in samples {
        if n == 0 || s.len() < n {
            skipped += 1;
            continue;
        }
        for w in s.windows(n) {
            distinct.insert(w);
            total += 1;
        }
    }
    let ratio = if total == 0 {
        0.0
    } else {
        distinct.len() as f64 / total as f64
    };
    DistN { ratio, skipped }
}

/// Mean over unordered pairs of `1 - |A ∩ B| / |A ∪ B|` on token sets.
pub fn jaccard_diversity(samples: &[Vec<u32>]) -> f64 {
    if samples.len() < 2 {
        return 0.0;
    }
    let sets: Vec<Vec<u32>> = samples
        .iter()
        .map(|s| {
            let mut v = s.clone();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let mut acc = 0.0;
    let mut pairs = 0usize;
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            acc += jaccard_distance(&sets[i], &sets[j]);
            pairs += 1;
        }
    }
    acc / pairs as f64
}

fn jaccard_distance(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

/// Summary of one sample set against one constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub samples: usize,
    pub pass_rate: f64,
    pub pass_se: f64,
    pub mean_total: f64,
    /// `c̄ / R` (infinite for `R = 0`).
    pub overshoot: f64,
    pub mean_violation: f64,
    /// Against the reference sample set, when one is given.
    pub unigram_kl: Option<f64>,
    pub dist2: f64,
    pub jaccard: Option<f64>,
}

impl MetricReport {
    pub fn compute(
        samples: &[Vec<u32>],
        table: &ScoreTable,
        target: f64,
        reference: Option<&[Vec<u32>]>,
        smoothing: Option<f64>,
        with_jaccard: bool,
    ) -> Self {
        let t = totals(samples, table);
        Self::from_totals(samples, &t, target, table.vocab_size(), reference, smoothing, with_jaccard)
    }

    /// As [`compute`](Self::compute) with the per-sample contributions already known.
    pub fn from_totals(
        samples: &[Vec<u32>],
        totals: &[f64],
        target: f64,
        vocab: usize,
        reference: Option<&[Vec<u32>]>,
        smoothing: Option<f64>,
        with_jaccard: bool,
    ) -> Self {
        let (pass, se) = pass_rate_from_totals(totals, target);
        let mean_total = if totals.is_empty() {
            0.0
        } else {
            kahan_sum(totals.iter().copied()) / totals.len() as f64
        };
        Self {
            samples: samples.len(),
            pass_rate: pass,
            pass_se: se,
            mean_total,
            overshoot: mean_total / target,
            mean_violation: mean_violation(totals, target),
            unigram_kl: reference.map(|r| unigram_kl(samples, r, vocab, smoothing)),
            dist2: dist_n(samples, 2).ratio,
            jaccard: with_jaccard.then(|| jaccard_diversity(samples)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorers::lexical_count_scores;
    use proptest::prelude::*;

    #[test]
    fn pass_rate_examples() {
        let all = [5.0; 10];
        assert_eq!(pass_rate_from_totals(&all, 4.0), (1.0, 0.0));
        assert_eq!(pass_rate_from_totals(&all, 6.0), (0.0, 0.0));
        let mut t = vec![1.0; 921];
        t.extend(vec![0.0; 79]);
        let (p, se) = pass_rate_from_totals(&t, 1.0);
        assert_eq!(p, 0.921);
        assert!((se - 0.008529888627643388).abs() < 1e-15);
    }

    #[test]
    fn kl_forced_arithmetic() {
        let p = vec![vec![0, 1]];
        let q = vec![vec![0, 1, 1, 1]];
        let kl = unigram_kl(&p, &q, 2, Some(0.0));
        assert!((kl - 0.14384103622589042).abs() < 1e-15);
        assert_eq!(unigram_kl(&q, &q, 2, None), 0.0);
    }

    #[test]
    fn mask_tokens_are_ignored() {
        let f = unigram_frequencies(&[vec![0, 2, 1, 2]], 2, Some(0.0));
        assert_eq!(f, vec![0.5, 0.5]);
    }

    #[test]
    fn dist_n_examples() {
        assert!((dist_n(&[vec![7, 7, 7, 7]], 2).ratio - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(dist_n(&[vec![1, 2, 3, 4]], 2).ratio, 1.0);
        let d = dist_n(&[vec![1], vec![1, 2]], 2);
        assert_eq!(d.skipped, 1);
        assert_eq!(d.ratio, 1.0);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard_diversity(&[vec![1, 2], vec![2, 1]]), 0.0);
        assert_eq!(jaccard_diversity(&[vec![1, 2], vec![3, 4]]), 1.0);
        assert!((jaccard_diversity(&[vec![1, 2], vec![2, 3]]) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn report_overshoot() {
        let table = lexical_count_scores(3, &[0]).unwrap();
        let s = vec![vec![0, 0, 1], vec![0, 2, 2]];
        let r = MetricReport::compute(&s, &table, 1.0, Some(&s), None, true);
        assert_eq!(r.mean_total, 1.5);
        assert_eq!(r.overshoot, 1.5);
        assert_eq!(r.pass_rate, 1.0);
        assert_eq!(r.unigram_kl, Some(0.0));
    }

    fn samples() -> impl Strategy<Value = Vec<Vec<u32>>> {
        prop::collection::vec(prop::collection::vec(0u32..6, 3..10), 2..12)
    }

    proptest! {
        #[test]
        fn self_kl_is_zero(s in samples()) {
            prop_assert_eq!(unigram_kl(&s, &s, 6, None), 0.0);
        }

        #[test]
        fn permutation_invariance(s in samples(), seed in any::<u64>()) {
            let mut r = s.clone();
            let k = (seed as usize) % r.len();
            r.rotate_left(k);
            r.reverse();
            prop_assert_eq!(dist_n(&s, 2), dist_n(&r, 2));
            prop_assert!((jaccard_diversity(&s) - jaccard_diversity(&r)).abs() < 1e-12);
        }

        #[test]
        fn pass_and_violation_fractions_sum_to_one(t in prop::collection::vec(0.0f64..10.0, 1..50), r in 0.0f64..10.0) {
            let (p, _) = pass_rate_from_totals(&t, r);
            let fail = t.iter().filter(|&&b| b < r).count() as f64 / t.len() as f64;
            prop_assert!((p + fail - 1.0).abs() < 1e-12);
        }
    }
}
