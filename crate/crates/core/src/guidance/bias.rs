use alloc::format;
use alloc::vec::Vec;

use crate::math::softmax_in_place;
use crate::scorers::ScoreTable;
use crate::{Error, Result};

/// Tilts a log-probability row by `λ·b` and renormalises:
/// `a_j = p_j e^{λ b_j} / Σ_i p_i e^{λ b_i}`.
///
/// Computed in log space with a max shift; `-inf` entries map to exactly 0.
pub fn apply_bias(logp_row: &[f64], b_row: &[f64], lambda: f64) -> Result<Vec<f64>> {
    if logp_row.len() != b_row.len() {
        return Err(Error::config(format!(
            "row length {} does not match score row length {}",
            logp_row.len(),
            b_row.len()
        )));
    }
    let mut out: Vec<f64> = logp_row
        .iter()
        .zip(b_row)
        .map(|(&lp, &b)| lp + lambda * b)
        .collect();
    normalise(&mut out)?;
    Ok(out)
}

/// Feedback-free baseline: `softmax(logp + α·b)`. Same functional form as [`apply_bias`].
pub fn static_bias(logp_row: &[f64], alpha: f64, b_row: &[f64]) -> Result<Vec<f64>> {
    apply_bias(logp_row, b_row, alpha)
}

/// Softmax of the unbiased row.
pub fn unbiased(logp_row: &[f64]) -> Result<Vec<f64>> {
    let mut out = logp_row.to_vec();
    normalise(&mut out)?;
    Ok(out)
}

/// Tilts a row by the summed exponent `Σ_i λ_i b_{i,ℓj}` of several constraints.
///
/// `terms` pairs each constraint's multiplier at position `pos` with its score table.
pub fn compose_constraints<'a>(
    terms: impl IntoIterator<Item = (f64, &'a ScoreTable)>,
    logp_row: &[f64],
    pos: usize,
) -> Result<Vec<f64>> {
    let mut out = logp_row.to_vec();
    add_tilt(&mut out, terms, pos)?;
    normalise(&mut out)?;
    Ok(out)
}

/// Adds `λ_i b_{i,ℓ}` to an exponent row in place.
pub(crate) fn add_tilt<'a>(
    row: &mut [f64],
    terms: impl IntoIterator<Item = (f64, &'a ScoreTable)>,
    pos: usize,
) -> Result<()> {
    let mut exponent: Option<Vec<f64>> = None;
    for (lambda, table) in terms {
        let b = table.row(pos);
        if b.len() != row.len() {
            return Err(Error::config(format!(
                "score table '{}' has vocabulary {} but row has {}",
                table.label,
                b.len(),
                row.len()
            )));
        }
        let e = exponent.get_or_insert_with(|| alloc::vec![0.0; row.len()]);
        for (acc, &bj) in e.iter_mut().zip(b) {
            *acc += lambda * bj;
        }
    }
    if let Some(e) = exponent {
        for (x, d) in row.iter_mut().zip(e) {
            *x += d;
        }
    }
    Ok(())
}

pub(crate) fn normalise(row: &mut [f64]) -> Result<()> {
    if softmax_in_place(row) {
        Ok(())
    } else {
        Err(Error::EmptySupport)
    }
}
