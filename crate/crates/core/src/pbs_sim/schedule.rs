use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{SimConfig, ValidatorConfig, STREAM_SCHEDULE};
use super::SimError;

/// Slot -> proposer assignment for the whole simulated range. Drawn up
/// front, but only readable through a [`ScheduleView`] that hides epochs past
/// the lookahead horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProposerSchedule {
    slots_per_epoch: u64,
    /// Index into the validator list, one per slot.
    assignments: Vec<usize>,
}

impl ProposerSchedule {
    /// A schedule from explicit assignments (indices into the validator list).
    pub fn from_assignments(slots_per_epoch: u64, assignments: Vec<usize>) -> ProposerSchedule {
        assert!(slots_per_epoch > 0, "slots_per_epoch must be positive");
        ProposerSchedule {
            slots_per_epoch,
            assignments,
        }
    }

    pub fn len(&self) -> u64 {
        self.assignments.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn slots_per_epoch(&self) -> u64 {
        self.slots_per_epoch
    }

    pub fn epoch_of(&self, slot: u64) -> u64 {
        slot / self.slots_per_epoch
    }

    /// What is known while the chain is in `current_epoch`: that epoch and
    /// the next one.
    pub fn view(&self, current_epoch: u64) -> ScheduleView<'_> {
        ScheduleView {
            schedule: self,
            current_epoch,
        }
    }

    /// Every assignment, ignoring visibility. For analysis after the fact.
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Maximal runs of consecutive slots assigned to the same pool, per pool
    /// and run length.
    pub fn pool_runs(
        &self,
        validators: &[ValidatorConfig],
    ) -> BTreeMap<String, BTreeMap<usize, u64>> {
        let mut out: BTreeMap<String, BTreeMap<usize, u64>> = BTreeMap::new();
        let mut i = 0;
        while i < self.assignments.len() {
            let pool = &validators[self.assignments[i]].pool_id;
            let mut j = i + 1;
            while j < self.assignments.len() && &validators[self.assignments[j]].pool_id == pool {
                j += 1;
            }
            *out.entry(pool.clone())
                .or_default()
                .entry(j - i)
                .or_default() += 1;
            i = j;
        }
        out
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScheduleView<'a> {
    schedule: &'a ProposerSchedule,
    current_epoch: u64,
}

impl ScheduleView<'_> {
    pub fn current_epoch(&self) -> u64 {
        self.current_epoch
    }

    /// Last epoch whose proposers are known.
    pub fn horizon_epoch(&self) -> u64 {
        self.current_epoch + 1
    }

    /// First slot past the visible range (clamped to the schedule length).
    pub fn horizon_end(&self) -> u64 {
        ((self.horizon_epoch() + 1) * self.schedule.slots_per_epoch).min(self.schedule.len())
    }

    pub fn proposer(&self, slot: u64) -> Result<usize, SimError> {
        if self.schedule.epoch_of(slot) > self.horizon_epoch() {
            return Err(SimError::BeyondHorizon {
                slot,
                horizon_epoch: self.horizon_epoch(),
            });
        }
        self.schedule
            .assignments
            .get(slot as usize)
            .copied()
            .ok_or(SimError::OutOfRange { slot })
    }
}

/// Draws each slot's proposer independently with probability proportional to
/// stake.
pub fn build_schedule(
    config: &SimConfig,
    validators: &[ValidatorConfig],
) -> Result<ProposerSchedule, SimError> {
    if config.slots_per_epoch == 0 {
        return Err(SimError::Config("slots_per_epoch must be >= 1".into()));
    }
    let weights: Vec<f64> = validators.iter().map(|v| v.stake_weight).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| SimError::NoStake)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(STREAM_SCHEDULE);
    let assignments = (0..config.total_slots())
        .map(|_| dist.sample(&mut rng))
        .collect();
    Ok(ProposerSchedule {
        slots_per_epoch: config.slots_per_epoch,
        assignments,
    })
}
