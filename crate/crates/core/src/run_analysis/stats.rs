use std::collections::BTreeMap;

use serde::Serialize;

use super::{Run, RunError};
use crate::trace_model::{BidRecord, Wei, WEI_PER_ETH};

/// Quartiles of a payment sample, in wei. Quantiles interpolate linearly
/// between order statistics, so they need not be integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuartileStats {
    pub n: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

impl QuartileStats {
    /// `None` for an empty sample.
    pub fn from_values(mut values: Vec<f64>) -> Option<QuartileStats> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(f64::total_cmp);
        Some(QuartileStats {
            n: values.len(),
            q25: quantile_sorted(&values, 0.25),
            median: quantile_sorted(&values, 0.5),
            q75: quantile_sorted(&values, 0.75),
        })
    }

    pub fn from_wei<'a>(values: impl IntoIterator<Item = &'a Wei>) -> Option<QuartileStats> {
        Self::from_values(values.into_iter().map(|w| w.as_f64()).collect())
    }

    /// The same quartiles expressed in ETH.
    pub fn to_eth(self) -> QuartileStats {
        let scale = WEI_PER_ETH as f64;
        QuartileStats {
            n: self.n,
            q25: self.q25 / scale,
            median: self.median / scale,
            q75: self.q75 / scale,
        }
    }
}

/// Linearly interpolated quantile of an ascending, non-empty slice:
/// position `h = (n - 1) q`, blending the two neighbouring order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty sample");
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median bid for `slot`, the "bid at the market" reference. An even count
/// takes the floor of the mean of the two middle bids.
pub fn naive_baseline(slot: u64, bids: &[BidRecord]) -> Result<Wei, RunError> {
    let mut values: Vec<u128> = bids
        .iter()
        .filter(|b| b.slot == slot)
        .map(|b| b.value.0)
        .collect();
    median_floor(&mut values).ok_or(RunError::NoBids { slot })
}

fn median_floor(values: &mut [u128]) -> Option<Wei> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let mid = values.len() / 2;
    let m = if values.len() % 2 == 1 {
        values[mid]
    } else {
        let (a, b) = (values[mid - 1], values[mid]);
        a / 2 + b / 2 + (a % 2 + b % 2) / 2
    };
    Some(Wei(m))
}

/// Per-slot naive baselines for every slot that received at least one bid.
pub fn slot_baselines(bids: &[BidRecord]) -> BTreeMap<u64, Wei> {
    let mut by_slot: BTreeMap<u64, Vec<u128>> = BTreeMap::new();
    for b in bids {
        by_slot.entry(b.slot).or_default().push(b.value.0);
    }
    by_slot
        .into_iter()
        .filter_map(|(slot, mut v)| median_floor(&mut v).map(|m| (slot, m)))
        .collect()
}

fn summarise<K: Ord>(groups: BTreeMap<K, Vec<f64>>) -> BTreeMap<K, QuartileStats> {
    groups
        .into_iter()
        .filter_map(|(k, v)| QuartileStats::from_values(v).map(|s| (k, s)))
        .collect()
}

/// Per-block payments pooled over all runs of exactly length `k`.
pub fn payment_by_run_length(runs: &[Run]) -> BTreeMap<usize, QuartileStats> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in runs {
        groups
            .entry(r.length())
            .or_default()
            .extend(r.payments.iter().map(|p| p.as_f64()));
    }
    summarise(groups)
}

pub fn payment_by_run_length_per_entity(runs: &[Run]) -> BTreeMap<(String, usize), QuartileStats> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in runs {
        groups
            .entry((r.entity.clone(), r.length()))
            .or_default()
            .extend(r.payments.iter().map(|p| p.as_f64()));
    }
    summarise(groups)
}

/// Payments pooled by 1-based position inside runs at least `min_length`
/// long. A `min_length` of 0 behaves like 1.
pub fn payment_by_position(runs: &[Run], min_length: usize) -> BTreeMap<usize, QuartileStats> {
    let mut groups: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in runs.iter().filter(|r| r.length() >= min_length.max(1)) {
        for (i, p) in r.payments.iter().enumerate() {
            groups.entry(i + 1).or_default().push(p.as_f64());
        }
    }
    summarise(groups)
}

pub fn payment_by_position_per_entity(
    runs: &[Run],
    min_length: usize,
) -> BTreeMap<(String, usize), QuartileStats> {
    let mut groups: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for r in runs.iter().filter(|r| r.length() >= min_length.max(1)) {
        for (i, p) in r.payments.iter().enumerate() {
            groups
                .entry((r.entity.clone(), i + 1))
                .or_default()
                .push(p.as_f64());
        }
    }
    summarise(groups)
}
