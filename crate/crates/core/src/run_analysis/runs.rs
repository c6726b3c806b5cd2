use std::collections::BTreeMap;

use serde::Serialize;

use super::RunError;
use crate::trace_model::{EntityMap, SlotOutcome, SlotResult, Wei};

/// A maximal sequence of consecutive slots won by one entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Run {
    pub entity: String,
    pub start_slot: u64,
    /// One payment per block, in slot order.
    pub payments: Vec<Wei>,
}

impl Run {
    pub fn length(&self) -> usize {
        self.payments.len()
    }

    pub fn end_slot(&self) -> u64 {
        self.start_slot + self.payments.len() as u64 - 1
    }

    pub fn slots(&self) -> impl Iterator<Item = u64> {
        self.start_slot..=self.end_slot()
    }
}

/// Splits a trace into maximal same-entity runs. LOCAL and MISSED slots, as
/// well as gaps in slot numbering, end a run.
pub fn detect_runs(outcomes: &[SlotOutcome], entities: &EntityMap) -> Result<Vec<Run>, RunError> {
    let mut runs = Vec::new();
    let mut current: Option<Run> = None;
    let mut previous: Option<u64> = None;
    for o in outcomes {
        if let Some(prev) = previous.filter(|&p| o.slot <= p) {
            return Err(RunError::Unsorted {
                slot: o.slot,
                previous: prev,
            });
        }
        previous = Some(o.slot);
        match &o.result {
            SlotResult::Pbs { winner, payment } => {
                let entity = entities.resolve(winner);
                match current.as_mut() {
                    Some(run) if run.entity == entity && run.end_slot() + 1 == o.slot => {
                        run.payments.push(*payment);
                    }
                    _ => {
                        runs.extend(current.take());
                        current = Some(Run {
                            entity: entity.into_owned(),
                            start_slot: o.slot,
                            payments: vec![*payment],
                        });
                    }
                }
            }
            SlotResult::Local | SlotResult::Missed => runs.extend(current.take()),
        }
    }
    runs.extend(current);
    Ok(runs)
}

/// Counts of maximal runs of exactly length `k`, per entity and overall.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunHistogram {
    pub by_entity: BTreeMap<String, BTreeMap<usize, u64>>,
    pub aggregate: BTreeMap<usize, u64>,
}

impl RunHistogram {
    pub fn add(&mut self, entity: &str, k: usize, count: u64) {
        *self
            .by_entity
            .entry(entity.to_owned())
            .or_default()
            .entry(k)
            .or_default() += count;
        *self.aggregate.entry(k).or_default() += count;
    }

    pub fn count(&self, entity: &str, k: usize) -> u64 {
        self.by_entity
            .get(entity)
            .and_then(|m| m.get(&k))
            .copied()
            .unwrap_or(0)
    }

    pub fn total(&self, k: usize) -> u64 {
        self.aggregate.get(&k).copied().unwrap_or(0)
    }

    /// Number of slots covered by the entity's runs, `sum k * count`.
    pub fn slots_covered(&self, entity: &str) -> u64 {
        self.by_entity
            .get(entity)
            .map_or(0, |m| m.iter().map(|(&k, &c)| k as u64 * c).sum())
    }

    pub fn max_k(&self) -> usize {
        self.aggregate.keys().next_back().copied().unwrap_or(0)
    }

    /// Adds another histogram into this one. Merging is associative and
    /// commutative, so shards can be combined in any order.
    pub fn merge(&mut self, other: &RunHistogram) {
        for (entity, counts) in &other.by_entity {
            for (&k, &c) in counts {
                self.add(entity, k, c);
            }
        }
    }
}

pub fn run_histogram(runs: &[Run]) -> RunHistogram {
    let mut h = RunHistogram::default();
    for r in runs {
        h.add(&r.entity, r.length(), 1);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace_model::Pubkey;

    fn key(c: char) -> Pubkey {
        Pubkey::parse(&c.to_string().repeat(96)).unwrap()
    }

    fn map() -> EntityMap {
        let mut m = EntityMap::new();
        m.insert(key('a'), "A").unwrap();
        m.insert(key('b'), "B").unwrap();
        m
    }

    fn summary(runs: &[Run]) -> Vec<(&str, u64, usize)> {
        runs.iter()
            .map(|r| (r.entity.as_str(), r.start_slot, r.length()))
            .collect()
    }

    #[test]
    fn empty_trace_has_no_runs() {
        assert!(detect_runs(&[], &map()).unwrap().is_empty());
        assert_eq!(run_histogram(&[]), RunHistogram::default());
    }

    #[test]
    fn splits_by_entity() {
        let outcomes: Vec<_> = "AABAAA"
            .chars()
            .enumerate()
            .map(|(i, c)| SlotOutcome::pbs(i as u64, key(c.to_ascii_lowercase()), Wei(i as u128)))
            .collect();
        let runs = detect_runs(&outcomes, &map()).unwrap();
        assert_eq!(summary(&runs), vec![("A", 0, 2), ("B", 2, 1), ("A", 3, 3)]);
        assert_eq!(runs[2].payments, vec![Wei(3), Wei(4), Wei(5)]);

        let h = run_histogram(&runs);
        assert_eq!(h.count("A", 2), 1);
        assert_eq!(h.count("A", 3), 1);
        assert_eq!(h.count("B", 1), 1);
        assert_eq!(h.slots_covered("A"), 5);
        assert_eq!(h.max_k(), 3);
    }

    #[test]
    fn local_slot_breaks_run() {
        let outcomes = vec![
            SlotOutcome::pbs(0, key('a'), Wei(1)),
            SlotOutcome::local(1),
            SlotOutcome::pbs(2, key('a'), Wei(1)),
        ];
        let runs = detect_runs(&outcomes, &map()).unwrap();
        assert_eq!(summary(&runs), vec![("A", 0, 1), ("A", 2, 1)]);
    }

    #[test]
    fn slot_gap_breaks_run() {
        let outcomes = vec![
            SlotOutcome::pbs(0, key('a'), Wei(1)),
            SlotOutcome::pbs(2, key('a'), Wei(1)),
            SlotOutcome::pbs(3, key('a'), Wei(1)),
        ];
        let runs = detect_runs(&outcomes, &map()).unwrap();
        assert_eq!(summary(&runs), vec![("A", 0, 1), ("A", 2, 2)]);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let outcomes = vec![SlotOutcome::local(3), SlotOutcome::local(3)];
        assert_eq!(
            detect_runs(&outcomes, &map()),
            Err(RunError::Unsorted {
                slot: 3,
                previous: 3
            })
        );
    }

    #[test]
    fn merge_matches_single_pass() {
        let mut a = RunHistogram::default();
        a.add("A", 2, 1);
        let mut b = RunHistogram::default();
        b.add("A", 2, 2);
        b.add("B", 1, 1);
        let mut ab = a.clone();
        ab.merge(&b);
        let mut ba = b.clone();
        ba.merge(&a);
        assert_eq!(ab, ba);
        assert_eq!(ab.count("A", 2), 3);
        assert_eq!(ab.total(1), 1);
    }
}
