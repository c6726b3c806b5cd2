use serde::Serialize;

use super::config::{BuilderConfig, ValidatorConfig};
use crate::trace_model::Wei;

/// Whether a proposer will accept this builder's blocks: it runs MEV-boost,
/// shares a relay with the builder, and (if it keeps an allow-list) lists the
/// builder.
pub fn eligible(builder: &BuilderConfig, proposer: &ValidatorConfig) -> bool {
    proposer.mevboost
        && builder.relays.iter().any(|r| proposer.relays.contains(r))
        && proposer
            .allowlist
            .as_ref()
            .is_none_or(|allowed| allowed.contains(&builder.id))
}

/// Per-bid form of [`eligible`]: the relay carrying the bid must be one the
/// proposer subscribes to.
fn bid_reaches(bid: &SimBid, proposer: &ValidatorConfig) -> bool {
    proposer.mevboost
        && proposer.relays.contains(&bid.relay_id)
        && proposer
            .allowlist
            .as_ref()
            .is_none_or(|allowed| allowed.contains(&bid.builder_id))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimBid {
    pub builder_id: String,
    pub relay_id: String,
    pub value: Wei,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AuctionMode {
    Pbs,
    Local,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuctionOutcome {
    pub slot: u64,
    pub mode: AuctionMode,
    pub winner: Option<String>,
    pub winning_relay: Option<String>,
    pub payment: Option<Wei>,
    pub losing_bids: Vec<SimBid>,
}

/// Resolves one slot. The proposer takes the highest bid that reaches it;
/// ties go to the lexicographically smallest `(builder_id, relay_id)`. With no
/// reachable bid the proposer builds locally.
pub fn run_auction(slot: u64, proposer: &ValidatorConfig, bids: &[SimBid]) -> AuctionOutcome {
    let best = bids
        .iter()
        .enumerate()
        .filter(|(_, b)| bid_reaches(b, proposer))
        .max_by(|(_, a), (_, b)| {
            a.value
                .cmp(&b.value)
                .then_with(|| (&b.builder_id, &b.relay_id).cmp(&(&a.builder_id, &a.relay_id)))
        });
    match best {
        Some((idx, winner)) => AuctionOutcome {
            slot,
            mode: AuctionMode::Pbs,
            winner: Some(winner.builder_id.clone()),
            winning_relay: Some(winner.relay_id.clone()),
            payment: Some(winner.value),
            losing_bids: bids
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != idx)
                .map(|(_, b)| b.clone())
                .collect(),
        },
        None => AuctionOutcome {
            slot,
            mode: AuctionMode::Local,
            winner: None,
            winning_relay: None,
            payment: None,
            losing_bids: bids.to_vec(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbs_sim::StrategySpec;

    fn proposer(mevboost: bool, relays: &[&str], allowlist: Option<&[&str]>) -> ValidatorConfig {
        ValidatorConfig {
            id: "v".into(),
            pool_id: "p".into(),
            stake_weight: 1.0,
            mevboost,
            relays: relays.iter().map(|s| s.to_string()).collect(),
            allowlist: allowlist.map(|a| a.iter().map(|s| s.to_string()).collect()),
        }
    }

    fn builder(id: &str, relays: &[&str]) -> BuilderConfig {
        BuilderConfig {
            id: id.into(),
            entity: None,
            pubkey: None,
            strategy: StrategySpec::Naive,
            relays: relays.iter().map(|s| s.to_string()).collect(),
            propensity: 1.0,
        }
    }

    fn bid(builder: &str, relay: &str, value: u128) -> SimBid {
        SimBid {
            builder_id: builder.into(),
            relay_id: relay.into(),
            value: Wei(value),
        }
    }

    #[test]
    fn eligibility_conditions() {
        assert!(!eligible(
            &builder("B1", &["r"]),
            &proposer(false, &["r"], None)
        ));
        assert!(!eligible(
            &builder("B1", &["r"]),
            &proposer(true, &["s"], None)
        ));
        assert!(!eligible(
            &builder("B2", &["r"]),
            &proposer(true, &["r"], Some(&["B1"]))
        ));
        assert!(eligible(
            &builder("B1", &["r"]),
            &proposer(true, &["r"], Some(&["B1"]))
        ));
        assert!(eligible(
            &builder("B1", &["q", "r"]),
            &proposer(true, &["r"], None)
        ));
    }

    #[test]
    fn no_bids_means_local() {
        let o = run_auction(3, &proposer(true, &["r"], None), &[]);
        assert_eq!(o.mode, AuctionMode::Local);
        assert_eq!(o.payment, None);
    }

    #[test]
    fn non_mevboost_proposer_builds_locally() {
        let o = run_auction(3, &proposer(false, &["r"], None), &[bid("B1", "r", 9)]);
        assert_eq!(o.mode, AuctionMode::Local);
        assert_eq!(o.losing_bids.len(), 1);
    }

    #[test]
    fn highest_bid_wins() {
        let bids = [bid("B1", "r", 5), bid("B2", "r", 7)];
        let o = run_auction(3, &proposer(true, &["r"], None), &bids);
        assert_eq!(o.winner.as_deref(), Some("B2"));
        assert_eq!(o.payment, Some(Wei(7)));
        assert_eq!(o.losing_bids, vec![bid("B1", "r", 5)]);
    }

    #[test]
    fn ties_go_to_smallest_id() {
        let bids = [bid("B2", "r", 7), bid("B1", "s", 7), bid("B1", "r", 7)];
        let o = run_auction(3, &proposer(true, &["r", "s"], None), &bids);
        assert_eq!(o.winner.as_deref(), Some("B1"));
        assert_eq!(o.winning_relay.as_deref(), Some("r"));
    }

    #[test]
    fn unreachable_bids_are_ignored() {
        let bids = [bid("B1", "s", 100), bid("B2", "r", 7), bid("B3", "r", 50)];
        let o = run_auction(3, &proposer(true, &["r"], Some(&["B1", "B2"])), &bids);
        assert_eq!(o.winner.as_deref(), Some("B2"));
    }
}
