//! Contribution tables `b_{ℓj}`: how much token `j` at position `ℓ` counts toward a target.

use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diffusion::SequenceState;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreLayout {
    /// One value per token, broadcast to every position.
    PerToken,
    /// One row per position.
    PerPosition { len: usize },
}

/// Non-negative, finite contribution scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    layout: ScoreLayout,
    vocab: usize,
    values: Vec<f64>,
    pub label: String,
}

impl ScoreTable {
    pub fn per_token(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let vocab = values.len();
        Self::checked(ScoreLayout::PerToken, vocab, values, label.into())
    }

    /// `values` is row-major, `len × vocab`.
    pub fn per_position(
        len: usize,
        vocab: usize,
        values: Vec<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if values.len() != len * vocab {
            return Err(Error::config(format!(
                "per-position table needs {} values, got {}",
                len * vocab,
                values.len()
            )));
        }
        Self::checked(ScoreLayout::PerPosition { len }, vocab, values, label.into())
    }

    fn checked(layout: ScoreLayout, vocab: usize, values: Vec<f64>, label: String) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::config("score table over an empty vocabulary"));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::config(format!(
                "score {v} in table '{label}' is negative or not finite"
            )));
        }
        Ok(Self {
            layout,
            vocab,
            values,
            label,
        })
    }

    pub fn layout(&self) -> ScoreLayout {
        self.layout
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        match self.layout {
            ScoreLayout::PerToken => &self.values,
            ScoreLayout::PerPosition { .. } => &self.values[pos * self.vocab..(pos + 1) * self.vocab],
        }
    }

    pub fn get(&self, pos: usize, token: u32) -> f64 {
        self.row(pos)[token as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn range(&self) -> f64 {
        self.max() - self.min()
    }

    /// Checks the table can be used for sequences of length `len`.
    pub fn check_shape(&self, len: usize, vocab: usize) -> Result<()> {
        if self.vocab != vocab {
            return Err(Error::config(format!(
                "score table '{}' has vocabulary {} but backend has {}",
                self.label, self.vocab, vocab
            )));
        }
        if let ScoreLayout::PerPosition { len: l } = self.layout {
            if l != len {
                return Err(Error::config(format!(
                    "score table '{}' covers {l} positions, sequences have {len}",
                    self.label
                )));
            }
        }
        Ok(())
    }

    /// Largest total contribution any length-`len` sequence can reach.
    pub fn max_total(&self, len: usize) -> f64 {
        (0..len)
            .map(|p| self.row(p).iter().copied().fold(0.0, f64::max))
            .sum()
    }

    /// `Σ_ℓ b_{ℓ, x_ℓ}` for a fully revealed sequence.
    pub fn total(&self, tokens: &[u32]) -> f64 {
        tokens
            .iter()
            .enumerate()
            .map(|(p, &t)| self.get(p, t))
            .sum()
    }

    fn to_per_position(&self, len: usize) -> Vec<f64> {
        match self.layout {
            ScoreLayout::PerToken => {
                let mut out = Vec::with_capacity(len * self.vocab);
                for _ in 0..len {
                    out.extend_from_slice(&self.values);
                }
                out
            }
            ScoreLayout::PerPosition { .. } => self.values.clone(),
        }
    }
}

/// `b_j = 1` for target tokens, `0` otherwise.
pub fn lexical_count_scores(vocab: usize, targets: &[u32]) -> Result<ScoreTable> {
    let mut values = vec![0.0; vocab];
    for &t in targets {
        let slot = values
            .get_mut(t as usize)
            .ok_or_else(|| Error::config(format!("target token {t} outside vocabulary of size {vocab}")))?;
        *slot = 1.0;
    }
    ScoreTable::per_token(values, "lexical")
}

/// `b_j = value(j)`; every data token must be present.
pub fn additive_property_scores(
    vocab: usize,
    values: impl IntoIterator<Item = (u32, f64)>,
) -> Result<ScoreTable> {
    let map: BTreeMap<u32, f64> = values.into_iter().collect();
    let mut out = Vec::with_capacity(vocab);
    for j in 0..vocab as u32 {
        let v = map
            .get(&j)
            .ok_or_else(|| Error::config(format!("no property value for token {j}")))?;
        out.push(*v);
    }
    if let Some(extra) = map.keys().find(|&&k| k as usize >= vocab) {
        return Err(Error::config(format!(
            "property value for token {extra} outside vocabulary of size {vocab}"
        )));
    }
    ScoreTable::per_token(out, "additive")
}

/// Fraction of each token's cluster members that carry the target tag.
pub fn cluster_fraction_scores<I>(
    members: &[Vec<I>],
    is_tagged: impl Fn(&I) -> bool,
) -> Result<ScoreTable> {
    let counts = members
        .iter()
        .map(|m| (m.len(), m.iter().filter(|i| is_tagged(i)).count()))
        .collect::<Vec<_>>();
    cluster_fraction_from_counts(&counts)
}

/// Same as [`cluster_fraction_scores`] from `(member_count, tagged_count)` pairs.
pub fn cluster_fraction_from_counts(counts: &[(usize, usize)]) -> Result<ScoreTable> {
    let mut values = Vec::with_capacity(counts.len());
    for (j, &(members, tagged)) in counts.iter().enumerate() {
        if members == 0 {
            return Err(Error::config(format!("token {j} has an empty member list")));
        }
        if tagged > members {
            return Err(Error::config(format!(
                "token {j}: {tagged} tagged members exceeds member count {members}"
            )));
        }
        values.push(tagged as f64 / members as f64);
    }
    let mut table = ScoreTable::per_token(values, "cluster_fraction")?;
    table.label = "cluster_fraction".to_string();
    Ok(table)
}

/// Synthetic `(member_count, tagged_count)` catalogue whose mean tag fraction is
/// close to `mean_fraction`, with only a `breadth` share of tokens carrying any signal.
pub fn synthetic_cluster_catalogue<R: Rng + ?Sized>(
    vocab: usize,
    mean_fraction: f64,
    breadth: f64,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let breadth = breadth.clamp(1e-6, 1.0);
    let peak = (2.0 * mean_fraction / breadth).min(1.0);
    (0..vocab)
        .map(|_| {
            let members = rng.random_range(30..=70usize);
            let rate = if rng.random::<f64>() < breadth {
                rng.random::<f64>() * peak
            } else {
                0.0
            };
            let tagged = (0..members).filter(|_| rng.random::<f64>() < rate).count();
            (members, tagged)
        })
        .collect()
}

/// Context-aware scorer steering toward a contiguous target subsequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsequenceScorer {
    pattern: Vec<u32>,
    vocab: usize,
}

impl SubsequenceScorer {
    pub fn new(pattern: Vec<u32>, vocab: usize) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::config("subsequence pattern is empty"));
        }
        if let Some(t) = pattern.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::config(format!("pattern token {t} outside vocabulary")));
        }
        Ok(Self { pattern, vocab })
    }

    pub fn pattern(&self) -> &[u32] {
        &self.pattern
    }

    pub fn scores(&self, state: &SequenceState) -> Result<ScoreTable> {
        subsequence_scores(state, &self.pattern, self.vocab)
    }

    /// Most pattern symbols matched by any placement in a finished sequence.
    pub fn best_match(&self, tokens: &[u32]) -> usize {
        let k = self.pattern.len();
        if k > tokens.len() {
            return 0;
        }
        (0..=tokens.len() - k)
            .map(|o| {
                self.pattern
                    .iter()
                    .zip(&tokens[o..o + k])
                    .filter(|(a, b)| a == b)
                    .count()
            })
            .max()
            .unwrap_or(0)
    }
}

/// Binary per-position table over masked positions.
///
/// `b_{ℓj} = 1` when some placement of `pattern` covering `ℓ` agrees with every
/// committed token inside its window and puts `j` at `ℓ`. Committed positions score 0.
pub fn subsequence_scores(state: &SequenceState, pattern: &[u32], vocab: usize) -> Result<ScoreTable> {
    let len = state.len();
    let k = pattern.len();
    if k > len {
        return Err(Error::config(format!(
            "pattern length {k} exceeds sequence length {len}"
        )));
    }
    let mut values = vec![0.0; len * vocab];
    for offset in 0..=len - k {
        let consistent = (0..k).all(|i| match state.get(offset + i) {
            Some(tok) => tok == pattern[i],
            None => true,
        });
        if !consistent {
            continue;
        }
        for (i, &sym) in pattern.iter().enumerate() {
            let pos = offset + i;
            if state.is_masked(pos) {
                values[pos * vocab + sym as usize] = 1.0;
            }
        }
    }
    ScoreTable::per_position(len, vocab, values, "subsequence")
}

/// Linear head-weighting: `b'_{ℓj} = b_{ℓj} · (1 + κ (1 - ℓ/(L-1)))`.
///
/// With a single position the head weight `1 + κ` applies.
pub fn frontload_weights(base: &ScoreTable, kappa: f64, len: usize) -> Result<ScoreTable> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::config(format!("front-load κ = {kappa} must be finite and ≥ 0")));
    }
    if kappa == 0.0 {
        return Ok(base.clone());
    }
    let vocab = base.vocab;
    let mut values = base.to_per_position(len);
    for pos in 0..len {
        let w = if len > 1 {
            1.0 + kappa * (1.0 - pos as f64 / (len - 1) as f64)
        } else {
            1.0 + kappa
        };
        for v in &mut values[pos * vocab..(pos + 1) * vocab] {
            *v *= w;
        }
    }
    let label = format!("{}+frontload", base.label);
    ScoreTable::per_position(len, vocab, values, label)
}

/// Where a constraint's scores come from each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreSource {
    Static(ScoreTable),
    /// Recomputed from the partial sequence every step.
    Subsequence(SubsequenceScorer),
}

impl ScoreSource {
    pub fn table<'a>(&'a self, state: &SequenceState) -> Result<Cow<'a, ScoreTable>> {
        match self {
            ScoreSource::Static(t) => Ok(Cow::Borrowed(t)),
            ScoreSource::Subsequence(s) => s.scores(state).map(Cow::Owned),
        }
    }

    pub fn vocab_size(&self) -> usize {
        match self {
            ScoreSource::Static(t) => t.vocab_size(),
            ScoreSource::Subsequence(s) => s.vocab,
        }
    }

    /// Score range used for per-objective step-size rescaling.
    pub fn nominal_range(&self) -> f64 {
        match self {
            ScoreSource::Static(t) => t.range(),
            ScoreSource::Subsequence(_) => 1.0,
        }
    }

    pub fn max_score(&self) -> f64 {
        match self {
            ScoreSource::Static(t) => t.max(),
            ScoreSource::Subsequence(_) => 1.0,
        }
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, ScoreSource::Subsequence(_))
    }

    pub fn check_shape(&self, len: usize, vocab: usize) -> Result<()> {
        match self {
            ScoreSource::Static(t) => t.check_shape(len, vocab),
            ScoreSource::Subsequence(s) => {
                if s.vocab != vocab {
                    return Err(Error::config("subsequence scorer vocabulary mismatch"));
                }
                if s.pattern.len() > len {
                    return Err(Error::config(format!(
                        "pattern length {} exceeds sequence length {len}",
                        s.pattern.len()
                    )));
                }
                Ok(())
            }
        }
    }
}

impl From<ScoreTable> for ScoreSource {
    fn from(t: ScoreTable) -> Self {
        ScoreSource::Static(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::Vocabulary;
    use rand::SeedableRng;

    fn state(vocab: usize, entries: &[Option<u32>]) -> SequenceState {
        SequenceState::from_partial(Vocabulary::new(vocab).unwrap(), entries, 1).unwrap()
    }

    #[test]
    fn lexical_examples() {
        let t = lexical_count_scores(5, &[1, 3]).unwrap();
        assert_eq!(t.values(), &[0.0, 1.0, 0.0, 1.0, 0.0]);
        let empty = lexical_count_scores(5, &[]).unwrap();
        assert!(empty.values().iter().all(|&v| v == 0.0));
        assert!(lexical_count_scores(5, &[5]).is_err());
    }

    #[test]
    fn lexical_is_binary_additive() {
        let lex = lexical_count_scores(6, &[0, 4]).unwrap();
        let add = additive_property_scores(6, (0..6u32).map(|j| (j, if j == 0 || j == 4 { 1.0 } else { 0.0 })))
            .unwrap();
        assert_eq!(lex.values(), add.values());
    }

    #[test]
    fn additive_examples() {
        let t = additive_property_scores(3, [(0, 12.0), (1, 14.0), (2, 16.0)]).unwrap();
        assert_eq!(t.values(), &[12.0, 14.0, 16.0]);
        assert!(additive_property_scores(3, [(0, 12.0), (2, 16.0)]).is_err());
        assert!(additive_property_scores(2, [(0, -1.0), (1, 1.0)]).is_err());
        // molecular-weight analog: per-position share of the target
        let per_pos: f64 = 350.0 / 72.0;
        assert!((per_pos - 4.861).abs() < 1e-3);
    }

    #[test]
    fn cluster_fraction_examples() {
        let t = cluster_fraction_from_counts(&[(10, 10), (50, 1)]).unwrap();
        assert_eq!(t.values()[0], 1.0);
        assert!((t.values()[1] - 0.02).abs() < 1e-15);
        assert!(cluster_fraction_from_counts(&[(0, 0)]).is_err());

        let members = vec![vec![1u32, 2, 3, 4], vec![5, 6]];
        let t = cluster_fraction_scores(&members, |i| i % 2 == 0).unwrap();
        assert_eq!(t.values(), &[0.5, 0.5]);
    }

    #[test]
    fn synthetic_catalogue_hits_sparse_regime() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let cat = synthetic_cluster_catalogue(4000, 0.0185, 0.19, &mut rng);
        let t = cluster_fraction_from_counts(&cat).unwrap();
        let mean = t.values().iter().sum::<f64>() / 4000.0;
        assert!((mean - 0.0185).abs() < 0.004, "mean {mean}");
        let breadth = t.values().iter().filter(|&&v| v > 0.0).count() as f64 / 4000.0;
        assert!(breadth < 0.25);
    }

    #[test]
    fn subsequence_alignment_example() {
        // a = 0, b = 1, c = 2
        let s = state(3, &[Some(0), None, None]);
        let t = subsequence_scores(&s, &[0, 1], 3).unwrap();
        assert_eq!(t.row(0), &[0.0, 0.0, 0.0]);
        assert_eq!(t.row(1), &[1.0, 1.0, 0.0]);
        assert_eq!(t.row(2), &[0.0, 1.0, 0.0]);
    }

    #[test]
    fn subsequence_conflict_gives_zero() {
        let s = state(3, &[Some(2), None]);
        let t = subsequence_scores(&s, &[0, 1], 3).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn subsequence_fully_committed_is_zero() {
        let s = state(3, &[Some(0), Some(1), Some(2)]);
        let t = subsequence_scores(&s, &[0, 1], 3).unwrap();
        assert!(t.values().iter().all(|&v| v == 0.0));
        assert!(subsequence_scores(&s, &[0, 1, 2, 0], 3).is_err());
    }

    #[test]
    fn subsequence_palindrome_symmetry() {
        let s = state(4, &[None; 7]);
        let pat = [1u32, 3, 2, 3, 1];
        let t = subsequence_scores(&s, &pat, 4).unwrap();
        for pos in 0..7 {
            assert_eq!(t.row(pos), t.row(6 - pos));
        }
    }

    #[test]
    fn best_match_counts_agreeing_symbols() {
        let s = SubsequenceScorer::new(vec![1, 2, 3], 4).unwrap();
        assert_eq!(s.best_match(&[0, 1, 2, 3]), 3);
        assert_eq!(s.best_match(&[1, 0, 3, 0]), 2);
        assert_eq!(s.best_match(&[1, 2]), 0);
    }

    #[test]
    fn frontload_examples() {
        let base = ScoreTable::per_token(vec![1.0, 0.0], "b").unwrap();
        assert_eq!(frontload_weights(&base, 0.0, 5).unwrap(), base);
        let t = frontload_weights(&base, 1.0, 2).unwrap();
        assert_eq!(t.get(0, 0), 2.0);
        assert_eq!(t.get(1, 0), 1.0);
        let t = frontload_weights(&base, 2.0, 5).unwrap();
        let w: Vec<f64> = (0..5).map(|p| t.get(p, 0)).collect();
        assert_eq!(w, vec![3.0, 2.5, 2.0, 1.5, 1.0]);
        assert!((0..5).all(|p| t.get(p, 1) == 0.0));
    }
}
