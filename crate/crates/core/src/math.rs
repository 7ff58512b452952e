//! Small numeric helpers shared across modules.

#[allow(unused_imports)]
use num_traits::Float;

/// Compensated (Neumaier) summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// `ln Σ exp(x_i)`, shifted by the maximum. Returns `-inf` when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: KahanSum = xs.iter().map(|&x| (x - max).exp()).collect();
    max + s.value().ln()
}

/// Overwrites `row` (a vector of unnormalised log-weights) with its softmax.
///
/// Returns `false` when the row has no finite entry, leaving it untouched.
pub fn softmax_in_place(row: &mut [f64]) -> bool {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return false;
    }
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
    true
}

/// Log-softmax of a row of logits, in place.
pub fn log_softmax_in_place(row: &mut [f64]) -> bool {
    let lse = log_sum_exp(row);
    if lse == f64::NEG_INFINITY || lse.is_nan() {
        return false;
    }
    for x in row.iter_mut() {
        *x -= lse;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_handles_large_magnitudes() {
        let v = log_sum_exp(&[700.0, 700.0]);
        assert!((v - (700.0 + 2f64.ln())).abs() < 1e-12);
        let v = log_sum_exp(&[-700.0, f64::NEG_INFINITY]);
        assert_eq!(v, -700.0);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut xs = std::vec![1e16, 1.0, -1e16];
        xs.extend(core::iter::repeat(1e-3).take(1000));
        assert!((kahan_sum(xs.iter().copied()) - 2.0).abs() < 1e-9);
    }
}
