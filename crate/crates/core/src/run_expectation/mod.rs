//! Expected counts of k-slot runs when each slot is an independent
//! Bernoulli(p) draw, p being an entity's market share.

mod compare;
mod exact;
mod monte_carlo;

use thiserror::Error;

pub use compare::{compare_observed_expected, ComparisonRow, RATIO_EPSILON};
pub use exact::expected_runs_exact;
pub use monte_carlo::{
    derive_entity_seed, expected_all_entities, expected_runs_mc, EntityExpectation,
    ExpectationCell, ExpectationTable, DEFAULT_K_MAX, DEFAULT_TRIALS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpectationError {
    #[error("probability {0} outside [0, 1]")]
    Probability(f64),
    #[error("run length {k} outside 1..={n_slots}")]
    RunLength { k: u64, n_slots: u64 },
    #[error("n_slots must be at least 1")]
    NoSlots,
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("k_max must be at least 1")]
    NoKMax,
}

fn check_probability(p: f64) -> Result<(), ExpectationError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(ExpectationError::Probability(p))
    }
}
