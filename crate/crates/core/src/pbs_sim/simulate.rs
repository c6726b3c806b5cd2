use std::collections::HashMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gumbel, StandardNormal};

use super::auction::{run_auction, AuctionMode, SimBid};
use super::config::{SimConfig, ValidatorConfig, STREAM_BUILDER_BASE, STREAM_MARKET};
use super::schedule::{build_schedule, ProposerSchedule};
use super::strategy::{strategy_from_spec, BidContext, BidStrategy};
use super::SimError;
use crate::trace_model::{BidRecord, EntityMap, Pubkey, SlotOutcome, Wei};

/// Slot length in milliseconds.
pub const SLOT_MS: u64 = 12_000;
/// Timestamp stamped on slot 0 bids. Arbitrary but fixed so output is stable.
pub const GENESIS_MS: u64 = 1_600_000_000_000;

#[derive(Debug, Clone)]
pub struct SimOutput {
    /// Every bid, in slot order, then builder order, then relay order.
    pub bids: Vec<BidRecord>,
    pub outcomes: Vec<SlotOutcome>,
    /// Builder pubkey to entity, for the run analysis.
    pub entities: EntityMap,
    pub schedule: ProposerSchedule,
    pub validators: Vec<ValidatorConfig>,
}

/// Runs the configured builders with the strategies named in the config.
pub fn simulate(config: &SimConfig) -> Result<SimOutput, SimError> {
    let strategies = config
        .builders
        .iter()
        .map(|b| strategy_from_spec(&b.strategy))
        .collect();
    simulate_with(config, strategies)
}

/// Runs with caller-supplied strategies, one per configured builder in order.
///
/// Per slot: the public median estimate `m` is drawn from the market stream
/// as `base * exp(market_sigma * Z)`; each builder draws Gumbel noise `G` from
/// its own stream and gets jitter `exp(noise_sigma * (G + ln propensity))`, so
/// among naive builders the winner is picked with probability proportional to
/// propensity. Missed slots are drawn before any bidding.
pub fn simulate_with(
    config: &SimConfig,
    mut strategies: Vec<Box<dyn BidStrategy>>,
) -> Result<SimOutput, SimError> {
    let validators = config.resolved_validators()?;
    config.validate(&validators)?;
    if strategies.len() != config.builders.len() {
        return Err(SimError::Config(format!(
            "{} strategies for {} builders",
            strategies.len(),
            config.builders.len()
        )));
    }
    let schedule = build_schedule(config, &validators)?;

    let mut entities = EntityMap::new();
    let pubkeys: Vec<Pubkey> = config
        .builders
        .iter()
        .map(|b| b.resolved_pubkey())
        .collect();
    for (b, pk) in config.builders.iter().zip(&pubkeys) {
        entities
            .insert(*pk, b.entity_name())
            .map_err(|e| SimError::Config(format!("builder {:?}: {e}", b.id)))?;
    }
    let index: HashMap<&str, usize> = config
        .builders
        .iter()
        .enumerate()
        .map(|(i, b)| (b.id.as_str(), i))
        .collect();

    let mut market = ChaCha8Rng::seed_from_u64(config.seed);
    market.set_stream(STREAM_MARKET);
    let mut builder_rngs: Vec<ChaCha8Rng> = (0..config.builders.len())
        .map(|i| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(STREAM_BUILDER_BASE + i as u64);
            r
        })
        .collect();
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    let log_propensity: Vec<f64> = config.builders.iter().map(|b| b.propensity.ln()).collect();

    let total = config.total_slots();
    let mut wins: Vec<Vec<u64>> = vec![Vec::new(); config.builders.len()];
    let mut bids = Vec::new();
    let mut outcomes = Vec::with_capacity(total as usize);
    let mut slot_bids: Vec<SimBid> = Vec::new();

    for slot in 0..total {
        let view = schedule.view(schedule.epoch_of(slot));
        let z: f64 = StandardNormal.sample(&mut market);
        let median = Wei(
            (config.base_median_wei.as_f64() * (config.market_sigma * z).exp()).round() as u128,
        );
        let missed = market.random::<f64>() < config.missed_rate;
        if missed {
            outcomes.push(SlotOutcome::missed(slot));
            continue;
        }

        slot_bids.clear();
        for (i, builder) in config.builders.iter().enumerate() {
            let g: f64 = gumbel.sample(&mut builder_rngs[i]);
            let ctx = BidContext {
                slot,
                schedule: view,
                validators: &validators,
                builder,
                own_wins: &wins[i],
                median_estimate: median,
                jitter: (config.noise_sigma * (g + log_propensity[i])).exp(),
            };
            if let Some(value) = strategies[i].next_bid(&ctx) {
                for relay in &builder.relays {
                    slot_bids.push(SimBid {
                        builder_id: builder.id.clone(),
                        relay_id: relay.clone(),
                        value,
                    });
                    bids.push(BidRecord {
                        slot,
                        builder_pubkey: pubkeys[i],
                        relay_id: relay.clone(),
                        value,
                        received_at_ms: Some(GENESIS_MS + slot * SLOT_MS),
                    });
                }
            }
        }

        let proposer = &validators[view.proposer(slot)?];
        let auction = run_auction(slot, proposer, &slot_bids);
        match (auction.mode, auction.winner, auction.payment) {
            (AuctionMode::Pbs, Some(winner), Some(payment)) => {
                let w = index[winner.as_str()];
                wins[w].push(slot);
                outcomes.push(SlotOutcome::pbs(slot, pubkeys[w], payment));
            }
            _ => outcomes.push(SlotOutcome::local(slot)),
        }
    }

    Ok(SimOutput {
        bids,
        outcomes,
        entities,
        schedule,
        validators,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbs_sim::{eligible, BuilderConfig, GeneratorSpec, StrategySpec};
    use crate::trace_model::SlotResult;
    use proptest::prelude::*;

    fn builder(id: &str, relays: &[&str], propensity: f64) -> BuilderConfig {
        BuilderConfig {
            id: id.into(),
            entity: None,
            pubkey: None,
            strategy: StrategySpec::Naive,
            relays: relays.iter().map(|s| s.to_string()).collect(),
            propensity,
        }
    }

    fn market(epochs: u64, seed: u64, builders: Vec<BuilderConfig>) -> SimConfig {
        SimConfig {
            epochs,
            seed,
            relays: vec!["r1".into(), "r2".into()],
            generate: Some(GeneratorSpec {
                validators: 200,
                pools: 5,
                mevboost_rate: 1.0,
                relays_per_validator: None,
            }),
            builders,
            ..SimConfig::default()
        }
    }

    fn wins_of(out: &SimOutput, id: &str) -> usize {
        let pk = crate::trace_model::synthetic_pubkey(id);
        out.outcomes
            .iter()
            .filter(|o| o.winner() == Some(&pk))
            .count()
    }

    #[test]
    fn single_builder_takes_every_pbs_slot() {
        let out = simulate(&market(10, 1, vec![builder("solo", &["r1"], 1.0)])).unwrap();
        assert_eq!(out.outcomes.len(), 320);
        assert_eq!(wins_of(&out, "solo"), 320);
    }

    #[test]
    fn shares_follow_propensity() {
        let cfg = market(
            3125,
            7,
            vec![
                builder("a", &["r1", "r2"], 0.6),
                builder("b", &["r1", "r2"], 0.4),
            ],
        );
        let out = simulate(&cfg).unwrap();
        let n = out.outcomes.len() as f64;
        assert_eq!(n, 100_000.0);
        let a = wins_of(&out, "a") as f64 / n;
        let b = wins_of(&out, "b") as f64 / n;
        assert!((a - 0.6).abs() <= 0.02, "a = {a}");
        assert!((b - 0.4).abs() <= 0.02, "b = {b}");
    }

    #[test]
    fn non_mevboost_validators_build_locally() {
        let mut cfg = market(20, 3, vec![builder("a", &["r1"], 1.0)]);
        cfg.generate.as_mut().unwrap().mevboost_rate = 0.5;
        let out = simulate(&cfg).unwrap();
        for o in &out.outcomes {
            let v = &out.validators[out.schedule.assignments()[o.slot as usize]];
            assert_eq!(
                matches!(o.result, SlotResult::Pbs { .. }),
                v.mevboost && v.relays.contains("r1")
            );
        }
    }

    #[test]
    fn missed_slots_carry_no_bids() {
        let mut cfg = market(10, 3, vec![builder("a", &["r1"], 1.0)]);
        cfg.missed_rate = 1.0;
        let out = simulate(&cfg).unwrap();
        assert!(out.bids.is_empty());
        assert!(out.outcomes.iter().all(|o| o.result == SlotResult::Missed));
    }

    #[test]
    fn same_seed_same_trace() {
        let cfg = market(
            20,
            11,
            vec![builder("a", &["r1"], 1.0), builder("b", &["r2"], 2.0)],
        );
        let x = simulate(&cfg).unwrap();
        let y = simulate(&cfg).unwrap();
        assert_eq!(x.outcomes, y.outcomes);
        assert_eq!(x.bids, y.bids);
        let mut other = cfg.clone();
        other.seed = 12;
        assert_ne!(simulate(&other).unwrap().outcomes, x.outcomes);
    }

    #[test]
    fn strategy_count_must_match() {
        let cfg = market(1, 0, vec![builder("a", &["r1"], 1.0)]);
        assert!(matches!(
            simulate_with(&cfg, Vec::new()),
            Err(SimError::Config(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn winners_are_always_eligible(
            seed in any::<u64>(),
            mevboost_rate in 0.0f64..=1.0,
            relays_per_validator in 1usize..=2,
            targeting in any::<bool>(),
        ) {
            let mut b2 = builder("b2", &["r2"], 1.0);
            if targeting {
                b2.strategy = StrategySpec::SequenceTargeting { k_target: 2, delta: 0.02 };
            }
            let mut cfg = market(8, seed, vec![builder("b1", &["r1"], 1.0), b2]);
            let g = cfg.generate.as_mut().unwrap();
            g.mevboost_rate = mevboost_rate;
            g.relays_per_validator = Some(relays_per_validator);
            let out = simulate(&cfg).unwrap();
            for o in &out.outcomes {
                if let Some(w) = o.winner() {
                    let b = cfg.builders.iter().find(|b| &b.resolved_pubkey() == w).unwrap();
                    let v = &out.validators[out.schedule.assignments()[o.slot as usize]];
                    prop_assert!(eligible(b, v));
                }
            }
        }
    }
}
