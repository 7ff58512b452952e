//! Small exact tests and summaries used by the harness.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::math::{kahan_sum, log_sum_exp};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    kahan_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() - 1) as f64
}

/// Standard error of the mean.
pub fn std_err(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    (variance(xs) / xs.len() as f64).sqrt()
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

/// `P(X ≥ k)` for `X ~ Binomial(n, p)`, summed in log space.
pub fn binomial_upper_tail(n: usize, k: usize, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    let lf = log_factorials(n);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let terms: Vec<f64> = (k..=n)
        .map(|i| lf[n] - lf[i] - lf[n - i] + i as f64 * lp + (n - i) as f64 * lq)
        .collect();
    log_sum_exp(&terms).exp().min(1.0)
}

/// One-sided sign test: probability of at least `wins` successes among
/// `wins + losses` fair coin flips. Ties are dropped by the caller.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    binomial_upper_tail(wins + losses, wins, 0.5)
}

/// Counts paired outcomes `a_i > b_i` and `a_i < b_i`.
pub fn paired_wins(a: &[f64], b: &[f64]) -> (usize, usize) {
    let mut wins = 0;
    let mut losses = 0;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            wins += 1;
        } else if x < y {
            losses += 1;
        }
    }
    (wins, losses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_small_cases() {
        assert!((binomial_upper_tail(3, 2, 0.5) - 0.5).abs() < 1e-15);
        assert!((binomial_upper_tail(10, 10, 0.5) - 1.0 / 1024.0).abs() < 1e-17);
        assert_eq!(binomial_upper_tail(5, 0, 0.3), 1.0);
        assert_eq!(binomial_upper_tail(5, 6, 0.3), 0.0);
    }

    #[test]
    fn sign_test_extremes() {
        assert!(sign_test(20, 0) < 1e-6);
        assert!((sign_test(0, 20) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn summaries() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(paired_wins(&[1.0, 2.0, 3.0], &[0.0, 2.0, 5.0]), (1, 1));
    }
}
