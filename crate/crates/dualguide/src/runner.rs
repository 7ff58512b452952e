//! Parallel chains with results in chain order.

use dualguide_core::backends::Recorder;
use dualguide_core::{run_reverse, BackendSpec, ChainRng, Constraint, LogitTrace, RunConfig, RunTrace};
use rayon::prelude::*;

use crate::error::AppResult;

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub trace: RunTrace,
    pub logits: Option<LogitTrace>,
}

/// Runs `chains` chains; chain `i` is seeded with `ChainRng::for_chain(seed, i)`.
///
/// The output order is the chain order regardless of scheduling, so results are
/// identical for any thread count.
pub fn run_chains(
    backend: &BackendSpec,
    constraints: &[Constraint],
    config: &RunConfig,
    chains: usize,
    seed: u64,
    record_logits: bool,
) -> AppResult<Vec<ChainOutput>> {
    (0..chains)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChainRng::for_chain(seed, i as u64);
            let inner = backend.build(config.seq_len)?;
            if record_logits {
                let mut rec = Recorder::new(inner);
                let trace = run_reverse(&mut rec, constraints, config, &mut rng)?;
                Ok(ChainOutput {
                    trace,
                    logits: Some(rec.into_trace()),
                })
            } else {
                let mut b = inner;
                let trace = run_reverse(&mut b, constraints, config, &mut rng)?;
                Ok(ChainOutput { trace, logits: None })
            }
        })
        .collect()
}

/// Final sequences only.
pub fn sample_sequences(
    backend: &BackendSpec,
    constraints: &[Constraint],
    config: &RunConfig,
    chains: usize,
    seed: u64,
) -> AppResult<Vec<Vec<u32>>> {
    Ok(run_chains(backend, constraints, config, chains, seed, false)?
        .into_iter()
        .map(|c| c.trace.tokens)
        .collect())
}

/// Each constraint frozen at `λ = α` with no multiplier feedback.
pub fn static_constraints(constraints: &[Constraint], alpha: f64) -> Vec<Constraint> {
    constraints
        .iter()
        .map(|c| {
            c.clone()
                .with_eta(0.0)
                .with_lambda_max(c.lambda_max.max(alpha))
                .with_lambda0(alpha)
        })
        .collect()
}
