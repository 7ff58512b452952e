//! Sequence state, masking schedules and the reverse denoising loop.

mod rng;
mod sampler;
mod schedule;
mod state;
mod trace;

pub use rng::ChainRng;
pub use sampler::{forward_mask, reverse_step, run_reverse, sample_categorical, RunConfig};
pub use schedule::{schedule_alpha, MaskSchedule, ScheduleKind};
pub use state::{SequenceState, Vocabulary};
pub use trace::{RunTrace, StepRecord};
