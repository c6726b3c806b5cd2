//! Consecutive-slot runs per builder entity and the payment statistics built
//! on top of them.

mod escalation;
mod runs;
mod stats;

use thiserror::Error;

pub use escalation::{
    escalation_index, least_squares_slope, Escalation, DEFAULT_ESCALATION_THRESHOLD,
};
pub use runs::{detect_runs, run_histogram, Run, RunHistogram};
pub use stats::{
    naive_baseline, payment_by_position, payment_by_position_per_entity, payment_by_run_length,
    payment_by_run_length_per_entity, quantile_sorted, slot_baselines, QuartileStats,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error("slot outcomes not strictly increasing: {slot} follows {previous}")]
    Unsorted { slot: u64, previous: u64 },
    #[error("no bids for slot {slot}")]
    NoBids { slot: u64 },
    #[error("run of length {length} is too short for an escalation index (need >= 2)")]
    RunTooShort { length: usize },
    #[error("no baseline for slot {slot}")]
    MissingBaseline { slot: u64 },
    #[error("zero baseline for slot {slot}")]
    ZeroBaseline { slot: u64 },
}
