//! Multi-block MEV (MMEV) analysis toolkit.
//!
//! The crate is organised as a pipeline:
//!
//! - [`trace_model`]: relay bid records and slot outcomes, ingestion, builder
//!   entity attribution and market shares.
//! - [`run_analysis`]: maximal consecutive-slot runs per builder entity, payment
//!   quartiles by run length and by position, and the escalation index.
//! - [`run_expectation`]: expected run counts under an i.i.d. Bernoulli
//!   market-share model, both closed-form and Monte Carlo, plus the
//!   observed-vs-expected comparison.
//! - [`pbs_sim`]: a slot-level proposer/builder separation auction simulator
//!   that produces traces in the [`trace_model`] formats.
//! - [`amm_momentum`]: a constant-product AMM and the multi-slot momentum
//!   strategy (inject, withhold sells, admit organic buys, offload).
//! - [`report`]: table writers and metadata sidecars shared by the CLI.

pub mod amm_momentum;
pub mod pbs_sim;
pub mod report;
pub mod run_analysis;
pub mod run_expectation;
pub mod trace_model;

pub use trace_model::{BidRecord, EntityMap, MarketShare, Pubkey, SlotOutcome, SlotResult, Wei};
