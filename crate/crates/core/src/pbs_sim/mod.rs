//! Slot-by-slot simulator of the proposer-builder auction.
//!
//! Proposers are drawn by stake, builders bid through relays, and each slot
//! resolves to a [`SlotOutcome`](crate::SlotOutcome) in the same shape as an
//! ingested trace, so the run analysis applies to simulated and observed data
//! alike.

mod auction;
mod config;
mod schedule;
mod simulate;
mod strategy;
mod text_config;

use thiserror::Error;

pub use auction::{eligible, run_auction, AuctionMode, AuctionOutcome, SimBid};
pub use config::{
    generate_validators, BuilderConfig, GeneratorSpec, SimConfig, StrategySpec, ValidatorConfig,
    DEFAULT_BASE_MEDIAN_WEI, DEFAULT_DELTA, DEFAULT_K_TARGET, DEFAULT_MEVBOOST_RATE,
    DEFAULT_SLOTS_PER_EPOCH,
};
pub use schedule::{build_schedule, ProposerSchedule, ScheduleView};
pub use simulate::{simulate, simulate_with, SimOutput, GENESIS_MS, SLOT_MS};
pub use strategy::{strategy_from_spec, BidContext, BidStrategy, Naive, SequenceTargeting, Window};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("config error: {0}")]
    Config(String),
    #[error("slot {slot} lies beyond the visible horizon (epoch {horizon_epoch})")]
    BeyondHorizon { slot: u64, horizon_epoch: u64 },
    #[error("slot {slot} is outside the schedule")]
    OutOfRange { slot: u64 },
    #[error("validators carry no stake")]
    NoStake,
}
