//! Primal-dual guided sampling for absorbing-state (masked) discrete diffusion.
//!
//! The crate is `no_std` and only needs `alloc`. It contains the numeric core:
//!
//! - [`diffusion`]: sequence state, masking schedules and the reverse denoising loop.
//! - [`guidance`]: the exponential logit tilt, mirror-descent multiplier updates,
//!   slack regimes, multi-constraint composition and the static-bias baseline.
//! - [`scorers`]: per-token and per-position contribution tables.
//! - [`backends`]: synthetic log-probability sources and in-memory trace replay.
//! - [`oracle`]: exact KL projection on small instances and bound evaluators.
//! - [`metrics`]: constraint satisfaction, fidelity, diversity and the
//!   temporal-consistency estimator.
//!
//! File formats, the experiment runner and the command line live in the
//! `dualguide` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod backends;
pub mod diffusion;
mod error;
pub mod guidance;
pub mod math;
pub mod metrics;
pub mod oracle;
pub mod scorers;
pub mod stats;

pub use backends::{Backend, BackendSpec, LogitMatrix, LogitTrace};
pub use diffusion::{
    run_reverse, ChainRng, MaskSchedule, RunConfig, RunTrace, SequenceState, StepRecord,
    Vocabulary,
};
pub use error::{Error, Result};
pub use guidance::{Constraint, GuidanceState, MultiplierScope, SlackMode};
pub use scorers::{ScoreSource, ScoreTable};
