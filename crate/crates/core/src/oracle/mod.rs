//! Exact answers on small instances and numeric evaluators for the violation
//! and per-step reward bounds.

mod bound;
mod enumerate;
mod tilt;

pub use bound::{
    reward_terms, statement1_bound, stochastic_correction, BoundInputs, BoundTrace,
    CorrectionParams,
};
pub use enumerate::{
    decode_sequence, product_distribution, sampler_distribution, sequence_totals,
    ENUMERATION_LIMIT,
};
pub use tilt::{exact_tilt_projection, tilt_at, TiltSolution};
