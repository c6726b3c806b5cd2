use std::fmt::Debug;

use super::auction::eligible;
use super::config::{BuilderConfig, StrategySpec, ValidatorConfig};
use super::schedule::ScheduleView;
use crate::trace_model::Wei;

/// Everything a builder may look at when pricing its bid for `slot`.
#[derive(Debug, Clone, Copy)]
pub struct BidContext<'a> {
    pub slot: u64,
    /// Proposer schedule as visible from the current epoch.
    pub schedule: ScheduleView<'a>,
    pub validators: &'a [ValidatorConfig],
    pub builder: &'a BuilderConfig,
    /// Slots this builder has won so far, ascending.
    pub own_wins: &'a [u64],
    /// Public estimate of the slot's median bid.
    pub median_estimate: Wei,
    /// Multiplicative valuation noise drawn for this builder and slot; 1.0 is
    /// noiseless.
    pub jitter: f64,
}

impl BidContext<'_> {
    /// Whether the proposer of `slot` would accept this builder. `None` past
    /// the visible horizon.
    pub fn eligible_at(&self, slot: u64) -> Option<bool> {
        let v = self.schedule.proposer(slot).ok()?;
        Some(eligible(self.builder, &self.validators[v]))
    }
}

/// A bidding policy. Implementations keep their own state and must not share
/// mutable state with other builders.
pub trait BidStrategy: Debug + Send {
    fn next_bid(&mut self, ctx: &BidContext<'_>) -> Option<Wei>;
}

fn scale(value: Wei, factor: f64) -> Wei {
    Wei((value.as_f64() * factor).round().max(0.0) as u128)
}

#[derive(Debug, Clone, Default)]
pub struct Naive;

impl BidStrategy for Naive {
    fn next_bid(&mut self, ctx: &BidContext<'_>) -> Option<Wei> {
        Some(scale(ctx.median_estimate, ctx.jitter))
    }
}

/// A stretch of consecutive slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: u64,
    pub len: u64,
}

impl Window {
    pub fn contains(&self, slot: u64) -> bool {
        slot >= self.start && slot < self.start + self.len
    }

    /// 1-based position of `slot` inside the window.
    pub fn position(&self, slot: u64) -> u64 {
        slot - self.start + 1
    }
}

/// Hunts for consecutive block space: bids an escalating premium through the
/// longest visible window of eligible proposers, naive otherwise.
#[derive(Debug, Clone)]
pub struct SequenceTargeting {
    pub k_target: usize,
    pub delta: f64,
    committed: Option<Window>,
}

impl SequenceTargeting {
    pub fn new(k_target: usize, delta: f64) -> Self {
        SequenceTargeting {
            k_target,
            delta,
            committed: None,
        }
    }

    pub fn committed(&self) -> Option<Window> {
        self.committed
    }

    /// Longest maximal run of eligible proposers from `ctx.slot` up to the
    /// horizon with at least `k_target` slots; earliest wins ties.
    pub fn best_window(&self, ctx: &BidContext<'_>) -> Option<Window> {
        let mut best: Option<Window> = None;
        let mut open: Option<u64> = None;
        let end = ctx.schedule.horizon_end();
        let consider = |start: u64, stop: u64, best: &mut Option<Window>| {
            let len = stop - start;
            if len >= self.k_target as u64 && best.is_none_or(|b| len > b.len) {
                *best = Some(Window { start, len });
            }
        };
        for s in ctx.slot..end {
            match (ctx.eligible_at(s).unwrap_or(false), open) {
                (true, None) => open = Some(s),
                (false, Some(start)) => {
                    consider(start, s, &mut best);
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(start) = open {
            consider(start, end, &mut best);
        }
        best
    }
}

impl BidStrategy for SequenceTargeting {
    fn next_bid(&mut self, ctx: &BidContext<'_>) -> Option<Wei> {
        if self.committed.is_some_and(|w| !w.contains(ctx.slot)) {
            self.committed = None;
        }
        if self.committed.is_none() {
            self.committed = self.best_window(ctx).filter(|w| w.start == ctx.slot);
        }
        match self.committed {
            Some(w) => {
                let position = w.position(ctx.slot);
                let factor = (1.0 + self.delta).powi((position - 1) as i32);
                Some(scale(ctx.median_estimate, factor))
            }
            None => Naive.next_bid(ctx),
        }
    }
}

pub fn strategy_from_spec(spec: &StrategySpec) -> Box<dyn BidStrategy> {
    match *spec {
        StrategySpec::Naive => Box::new(Naive),
        StrategySpec::SequenceTargeting { k_target, delta } => {
            Box::new(SequenceTargeting::new(k_target, delta))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pbs_sim::ProposerSchedule;
    use crate::trace_model::WEI_PER_ETH;

    fn validator(id: &str, mevboost: bool) -> ValidatorConfig {
        ValidatorConfig {
            id: id.into(),
            pool_id: id.into(),
            stake_weight: 1.0,
            mevboost,
            relays: ["r".to_string()].into(),
            allowlist: None,
        }
    }

    fn builder() -> BuilderConfig {
        BuilderConfig {
            id: "b".into(),
            entity: None,
            pubkey: None,
            strategy: StrategySpec::Naive,
            relays: ["r".to_string()].into(),
            propensity: 1.0,
        }
    }

    /// Four-slot epochs over a fixed proposer pattern.
    struct Fixture {
        validators: Vec<ValidatorConfig>,
        schedule: ProposerSchedule,
        builder: BuilderConfig,
    }

    impl Fixture {
        fn new(eligible_pattern: &[bool]) -> Fixture {
            let validators = vec![validator("off", false), validator("on", true)];
            let schedule = ProposerSchedule::from_assignments(
                4,
                eligible_pattern.iter().map(|&e| e as usize).collect(),
            );
            Fixture {
                validators,
                schedule,
                builder: builder(),
            }
        }

        fn ctx(&self, slot: u64, median: Wei) -> BidContext<'_> {
            BidContext {
                slot,
                schedule: self.schedule.view(slot / 4),
                validators: &self.validators,
                builder: &self.builder,
                own_wins: &[],
                median_estimate: median,
                jitter: 1.0,
            }
        }
    }

    #[test]
    fn naive_bids_the_estimate() {
        let f = Fixture::new(&[true; 8]);
        assert_eq!(Naive.next_bid(&f.ctx(0, Wei(1234))), Some(Wei(1234)));
        let mut noisy = f.ctx(0, Wei(1000));
        noisy.jitter = 1.5;
        assert_eq!(Naive.next_bid(&noisy), Some(Wei(1500)));
    }

    #[test]
    fn escalates_through_window() {
        // eligible at slots 1..=3, ineligible elsewhere
        let pattern = [false, true, true, true, false, false, false, false];
        let f = Fixture::new(&pattern);
        let mut s = SequenceTargeting::new(2, 0.02);
        let one_eth = Wei(WEI_PER_ETH);
        assert_eq!(s.next_bid(&f.ctx(0, one_eth)), Some(one_eth));
        assert_eq!(s.committed(), None);
        assert_eq!(s.next_bid(&f.ctx(1, one_eth)), Some(one_eth));
        assert_eq!(s.committed(), Some(Window { start: 1, len: 3 }));
        let third = s.next_bid(&f.ctx(2, one_eth)).unwrap();
        assert!((third.as_eth_f64() - 1.02).abs() < 1e-12, "{third}");
        let fourth = s.next_bid(&f.ctx(3, one_eth)).unwrap();
        assert!((fourth.as_eth_f64() - 1.0404).abs() < 1e-12, "{fourth}");
        assert_eq!(s.next_bid(&f.ctx(4, one_eth)), Some(one_eth));
        assert_eq!(s.committed(), None);
    }

    #[test]
    fn falls_back_without_long_window() {
        let pattern = [true, false, true, false, true, false, true, false];
        let f = Fixture::new(&pattern);
        let mut s = SequenceTargeting::new(2, 0.02);
        for slot in 0..8 {
            assert_eq!(s.next_bid(&f.ctx(slot, Wei(100))), Some(Wei(100)));
            assert_eq!(s.committed(), None);
        }
    }

    #[test]
    fn prefers_longest_window() {
        // slots 0-1 eligible (len 2), 3-6 eligible (len 4), visible from epoch 0
        let pattern = [true, true, false, true, true, true, true, false];
        let f = Fixture::new(&pattern);
        let s = SequenceTargeting::new(2, 0.02);
        assert_eq!(
            s.best_window(&f.ctx(0, Wei(1))),
            Some(Window { start: 3, len: 4 })
        );
        let mut s = s;
        s.next_bid(&f.ctx(0, Wei(1)));
        assert_eq!(s.committed(), None);
    }

    #[test]
    fn window_search_stops_at_horizon() {
        let f = Fixture::new(&[true; 16]);
        let s = SequenceTargeting::new(2, 0.02);
        // from epoch 0 only epochs 0 and 1 are visible
        assert_eq!(
            s.best_window(&f.ctx(0, Wei(1))),
            Some(Window { start: 0, len: 8 })
        );
    }
}
