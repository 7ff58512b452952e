use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backends::{Backend, BackendSpec};
use crate::diffusion::{MaskSchedule, SequenceState, Vocabulary};
use crate::scorers::ScoreTable;
use crate::{Error, Result};

/// Largest sequence space the oracles will enumerate.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// Largest `(V + 1)^L` partial-state space [`sampler_distribution`] will walk.
const PARTIAL_STATE_LIMIT: usize = 20_000;

fn space_size(vocab: usize, len: usize, limit: usize) -> Result<usize> {
    let mut n: usize = 1;
    for _ in 0..len {
        n = n
            .checked_mul(vocab)
            .filter(|&n| n <= limit)
            .ok_or(Error::Range {
                what: "sequence space",
                value: usize::MAX,
                max: limit,
            })?;
    }
    Ok(n)
}

/// Sequence number `index` with position 0 as the most significant digit.
pub fn decode_sequence(mut index: usize, vocab: usize, len: usize) -> Vec<u32> {
    let mut out = vec![0u32; len];
    for slot in out.iter_mut().rev() {
        *slot = (index % vocab) as u32;
        index /= vocab;
    }
    out
}

fn encode_sequence(tokens: &[u32], vocab: usize) -> usize {
    tokens.iter().fold(0, |acc, &t| acc * vocab + t as usize)
}

/// `B(x) = Σ_ℓ b_{ℓ, x_ℓ}` for every sequence in enumeration order.
pub fn sequence_totals(table: &ScoreTable, vocab: usize, len: usize) -> Result<Vec<f64>> {
    table.check_shape(len, vocab)?;
    let n = space_size(vocab, len, ENUMERATION_LIMIT)?;
    Ok((0..n)
        .map(|i| table.total(&decode_sequence(i, vocab, len)))
        .collect())
}

/// Independent positions sharing `probs`.
pub fn product_distribution(probs: &[f64], len: usize) -> Result<Vec<f64>> {
    let v = probs.len();
    let n = space_size(v, len, ENUMERATION_LIMIT)?;
    Ok((0..n)
        .map(|i| {
            decode_sequence(i, v, len)
                .iter()
                .map(|&t| probs[t as usize])
                .product()
        })
        .collect())
}

/// Exact law of the unguided sampler's final sequence for a deterministic backend.
///
/// Walks every partial state reachable under the schedule, so it is only usable
/// for tiny `V` and `L`.
pub fn sampler_distribution(spec: &BackendSpec, len: usize, schedule: &MaskSchedule) -> Result<Vec<f64>> {
    if matches!(spec, BackendSpec::Drifting { .. } | BackendSpec::Trace(_)) {
        return Err(Error::config(format!(
            "exact sampler law needs a deterministic backend, got {}",
            spec.kind()
        )));
    }
    let v = spec.vocab();
    space_size(v + 1, len, PARTIAL_STATE_LIMIT)?;
    let vocab = Vocabulary::new(v)?;
    let mut backend = spec.build(len)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let steps = schedule.steps();

    let mut layer: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
    layer.insert(vec![vocab.mask_id(); len], 1.0);
    for t in (0..steps).rev() {
        let u = schedule.unmask_probability(t)?;
        let mut next: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for (tokens, &mass) in &layer {
            let entries: Vec<Option<u32>> = tokens
                .iter()
                .map(|&x| (x != vocab.mask_id()).then_some(x))
                .collect();
            let state = SequenceState::from_partial(vocab, &entries, t + 1)?;
            let logits = backend.logits(&state, &mut rng)?;
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(tokens.clone(), mass)];
            for pos in 0..len {
                if !state.is_masked(pos) {
                    continue;
                }
                let row = logits.row(pos);
                let mut grown = Vec::with_capacity(partial.len() * (v + 1));
                for (toks, m) in &partial {
                    if u < 1.0 {
                        grown.push((toks.clone(), m * (1.0 - u)));
                    }
                    for (j, &lp) in row.iter().enumerate() {
                        let p = lp.exp();
                        if p > 0.0 {
                            let mut x = toks.clone();
                            x[pos] = j as u32;
                            grown.push((x, m * u * p));
                        }
                    }
                }
                partial = grown;
            }
            for (toks, m) in partial {
                *next.entry(toks).or_insert(0.0) += m;
            }
        }
        layer = next;
    }

    let n = space_size(v, len, ENUMERATION_LIMIT)?;
    let mut out = vec![0.0; n];
    for (tokens, mass) in layer {
        if tokens.iter().any(|&x| x == vocab.mask_id()) {
            return Err(Error::Invariant("sampler ended with a masked position".into()));
        }
        out[encode_sequence(&tokens, v)] += mass;
    }
    Ok(out)
}
