use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{ChainRng, MaskSchedule, RunTrace, SequenceState, StepRecord, Vocabulary};
use crate::backends::{Backend, LogitMatrix};
use crate::guidance::{
    add_tilt, check_vocabularies, effective_etas, expected_future_contribution, normalise,
    Constraint, GuidanceState, SlackMode, StepContext,
};
use crate::oracle::{reward_terms, stochastic_correction, CorrectionParams};
use crate::scorers::ScoreTable;
use crate::{Error, Result};

/// Tolerance on the row sums handed to [`reverse_step`].
const ROW_TOLERANCE: f64 = 1e-9;

/// Per-chain run settings. Constraints and the backend are passed separately.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seq_len: usize,
    pub schedule: MaskSchedule,
    /// When false the constraints are ignored and sampling is unconstrained.
    pub guidance: bool,
    /// Record the per-step reward and its leading-term lower bound.
    pub track_bound: bool,
    /// Subtracted from the per-step bound when set.
    pub correction: Option<CorrectionParams>,
}

impl RunConfig {
    /// Linear schedule, guidance on, no bound tracking.
    pub fn new(seq_len: usize, steps: usize) -> Result<Self> {
        if seq_len == 0 {
            return Err(Error::config("sequence length must be ≥ 1"));
        }
        Ok(Self {
            seq_len,
            schedule: MaskSchedule::linear(steps)?,
            guidance: true,
            track_bound: false,
            correction: None,
        })
    }

    pub fn steps(&self) -> usize {
        self.schedule.steps()
    }

    pub fn with_bound_tracking(mut self, on: bool) -> Self {
        self.track_bound = on;
        self
    }

    pub fn with_guidance(mut self, on: bool) -> Self {
        self.guidance = on;
        self
    }
}

/// Inverse-CDF draw over token index order. Always consumes exactly one uniform.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> Result<u32> {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = None;
    for (j, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            cum += p;
            last = Some(j);
            if u < cum {
                return Ok(j as u32);
            }
        }
    }
    // Rounding left the cumulative sum just under u.
    last.map(|j| j as u32).ok_or(Error::EmptySupport)
}

/// Scans masked positions in order: Bernoulli reveal with probability `u`,
/// then a categorical draw from the row `row(pos)` fills in.
fn sample_masked<R: Rng + ?Sized>(
    state: &mut SequenceState,
    u: f64,
    rng: &mut R,
    mut row: impl FnMut(usize, &mut Vec<f64>) -> Result<()>,
) -> Result<Vec<(usize, u32)>> {
    let mut commits = Vec::new();
    let mut buf = Vec::with_capacity(state.vocab().size());
    for pos in 0..state.len() {
        if !state.is_masked(pos) {
            continue;
        }
        let reveal = u >= 1.0 || rng.random::<f64>() < u;
        if !reveal {
            continue;
        }
        row(pos, &mut buf)?;
        let tok = sample_categorical(&buf, rng)?;
        commits.push((pos, tok));
    }
    for &(pos, tok) in &commits {
        state.commit(pos, tok);
    }
    Ok(commits)
}

/// One reverse step from `x_next` (at step `t + 1`) to step `t`.
///
/// `probs` is row-major `L × V`; rows of masked positions must be distributions.
pub fn reverse_step<R: Rng + ?Sized>(
    x_next: &SequenceState,
    probs: &[f64],
    schedule: &MaskSchedule,
    rng: &mut R,
) -> Result<SequenceState> {
    let v = x_next.vocab().size();
    let len = x_next.len();
    if probs.len() != len * v {
        return Err(Error::config(format!(
            "probability table has {} entries, expected {}",
            probs.len(),
            len * v
        )));
    }
    let t = x_next
        .step
        .checked_sub(1)
        .ok_or_else(|| Error::Contract("cannot step below t = 0".into()))?;
    for pos in 0..len {
        if !x_next.is_masked(pos) {
            continue;
        }
        let row = &probs[pos * v..(pos + 1) * v];
        let sum: f64 = row.iter().sum();
        if row.iter().any(|p| !(*p >= 0.0)) || !((sum - 1.0).abs() <= ROW_TOLERANCE) {
            return Err(Error::Contract(format!(
                "probability row {pos} sums to {sum}, not 1 within {ROW_TOLERANCE}"
            )));
        }
    }
    let u = schedule.unmask_probability(t)?;
    let mut next = x_next.clone();
    sample_masked(&mut next, u, rng, |pos, buf| {
        buf.clear();
        buf.extend_from_slice(&probs[pos * v..(pos + 1) * v]);
        Ok(())
    })?;
    next.step = t;
    Ok(next)
}

/// Masks each position of a fully revealed `x0` independently with probability `1 - α_t`.
pub fn forward_mask<R: Rng + ?Sized>(
    x0: &SequenceState,
    t: usize,
    schedule: &MaskSchedule,
    rng: &mut R,
) -> Result<SequenceState> {
    if !x0.is_fully_unmasked() {
        return Err(Error::Contract("forward masking needs a fully revealed sequence".into()));
    }
    let alpha = schedule.alpha(t)?;
    let mut out = x0.clone();
    out.step = t;
    if alpha >= 1.0 {
        return Ok(out);
    }
    for pos in 0..out.len() {
        if alpha <= 0.0 || rng.random::<f64>() >= alpha {
            out.mask(pos);
        }
    }
    Ok(out)
}

fn check_inputs<B: Backend + ?Sized>(
    backend: &B,
    constraints: &[Constraint],
    config: &RunConfig,
) -> Result<Vocabulary> {
    let v = backend.vocab();
    if backend.seq_len() != config.seq_len {
        return Err(Error::config(format!(
            "backend covers {} positions, run needs {}",
            backend.seq_len(),
            config.seq_len
        )));
    }
    let vocab = Vocabulary::new(v)?;
    check_vocabularies(constraints)?;
    for c in constraints {
        c.validate()?;
        c.scores.check_shape(config.seq_len, v)?;
    }
    Ok(vocab)
}

fn fill_exponent(
    exponent: &mut [f64],
    duals: &[GuidanceState],
    constraints: &[Constraint],
    tables: &[Cow<'_, ScoreTable>],
    pos: usize,
    len: usize,
) {
    exponent.iter_mut().for_each(|e| *e = 0.0);
    for ((d, c), table) in duals.iter().zip(constraints).zip(tables) {
        let lambda = d.lambda_at(pos);
        let share = c.target / len as f64;
        for (e, &b) in exponent.iter_mut().zip(table.row(pos)) {
            *e += lambda * (b - share);
        }
    }
}

/// Runs the guided reverse process from a fully masked sequence to `t = 0`.
///
/// With `constraints` empty (or guidance off) this is plain ancestral sampling.
/// Each step: query the backend, tilt rows of positions that reveal by the
/// current multipliers, sample, then feed this step's commits into every
/// constraint's slack and update its multiplier for the next step.
pub fn run_reverse<B: Backend + ?Sized>(
    backend: &mut B,
    constraints: &[Constraint],
    config: &RunConfig,
    rng: &mut ChainRng,
) -> Result<RunTrace> {
    let vocab = check_inputs(backend, constraints, config)?;
    let v = vocab.size();
    let len = config.seq_len;
    let steps = config.steps();
    let guided = config.guidance && !constraints.is_empty();
    let active: &[Constraint] = if guided { constraints } else { &[] };
    let etas = effective_etas(active);
    let mut duals = active
        .iter()
        .zip(&etas)
        .map(|(c, &eta)| GuidanceState::new(c, len, eta))
        .collect::<Result<Vec<_>>>()?;

    let mut state = SequenceState::fully_masked(vocab, len, steps);
    let mut prior: Option<LogitMatrix> = None;
    let mut exponent = vec![0.0; v];
    let mut records = Vec::with_capacity(steps);

    for t in (0..steps).rev() {
        let logits = backend.logits(&state, &mut rng.backend)?;
        if logits.vocab() != v || logits.len() != len {
            return Err(Error::config(format!(
                "backend emitted a {}×{} matrix, expected {len}×{v}",
                logits.len(),
                logits.vocab()
            )));
        }
        if config.track_bound && prior.is_none() {
            prior = Some(logits.clone());
        }
        let tables = active
            .iter()
            .map(|c| c.scores.table(&state))
            .collect::<Result<Vec<_>>>()?;
        let lambda_used: Vec<f64> = duals.iter().map(|d| d.lambda_summary()).collect();
        let u = config.schedule.unmask_probability(t)?;

        let commits = sample_masked(&mut state, u, &mut rng.sampling, |pos, buf| {
            buf.clear();
            buf.extend_from_slice(logits.row(pos));
            if guided {
                let terms = duals
                    .iter()
                    .zip(&tables)
                    .map(|(d, table)| (d.lambda_at(pos), table.as_ref()));
                add_tilt(buf, terms, pos)?;
            }
            normalise(buf)
        })?;

        let (pi_t, bound) = match &prior {
            Some(prior) => {
                let mut pi = 0.0;
                let mut lower = 0.0;
                for &(pos, tok) in &commits {
                    fill_exponent(&mut exponent, &duals, active, &tables, pos, len);
                    let (p, b) = reward_terms(logits.row(pos), prior.row(pos), &exponent, tok);
                    pi += p;
                    lower += b;
                }
                if let Some(c) = &config.correction {
                    lower -= stochastic_correction(c, commits.len(), len, v, steps, t);
                }
                (Some(pi), Some(lower))
            }
            None => (None, None),
        };

        let masked = state.masked_count();
        for (d, table) in duals.iter_mut().zip(&tables) {
            d.record_commits(&commits, table)?;
            let future = (d.mode() == SlackMode::Optimistic)
                .then(|| expected_future_contribution(logits, &state, table));
            d.update(&StepContext {
                masked,
                expected_future: future.as_deref(),
            })?;
        }
        state.step = t;
        records.push(StepRecord {
            t,
            commits,
            lambda: lambda_used,
            slack: duals.iter().map(|d| d.slack_summary()).collect(),
            pi_t,
            bound,
        });
    }

    Ok(RunTrace {
        vocab: v,
        seq_len: len,
        records,
        tokens: state.raw().to_vec(),
    })
}
