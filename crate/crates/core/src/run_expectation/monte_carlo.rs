use std::collections::BTreeMap;

use rand::distr::{Bernoulli, Distribution};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{check_probability, ExpectationError};
use crate::trace_model::MarketShare;

pub const DEFAULT_TRIALS: u64 = 10_000;
pub const DEFAULT_K_MAX: usize = 10;

/// Trials per RNG substream. Batch `b` always draws from ChaCha stream `b`,
/// so the result does not depend on how batches are scheduled.
const BATCH_TRIALS: u64 = 250;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpectationCell {
    pub k: usize,
    /// Mean count of maximal runs of exactly length `k` per trial.
    pub expected: f64,
    /// Standard error of that mean.
    pub stderr: f64,
    /// Standard deviation of the per-trial count (spread of one realisation).
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityExpectation {
    pub p: f64,
    pub seed: u64,
    pub trials: u64,
    pub n_slots: u64,
    /// Cells for `k = 1..=k_max`, in order.
    pub cells: Vec<ExpectationCell>,
}

impl EntityExpectation {
    pub fn cell(&self, k: usize) -> Option<&ExpectationCell> {
        k.checked_sub(1).and_then(|i| self.cells.get(i))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectationTable {
    pub n_slots: u64,
    pub k_max: usize,
    pub trials: u64,
    pub seed: u64,
    pub entities: BTreeMap<String, EntityExpectation>,
}

/// Exact integer moments of the per-trial counts; merging is plain addition.
#[derive(Clone)]
struct Moments {
    sum: Vec<u128>,
    sum_sq: Vec<u128>,
}

impl Moments {
    fn new(k_max: usize) -> Self {
        Moments {
            sum: vec![0; k_max],
            sum_sq: vec![0; k_max],
        }
    }

    fn merge(mut self, other: Moments) -> Moments {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
        self
    }
}

/// Counts maximal runs of each length `1..=k_max` in one simulated sequence.
fn simulate_trial(rng: &mut ChaCha8Rng, coin: &Bernoulli, n_slots: u64, counts: &mut [u64]) {
    counts.iter_mut().for_each(|c| *c = 0);
    let k_max = counts.len();
    let mut run = 0usize;
    let mut successes = 0u64;
    let mut covered = 0u64;
    for _ in 0..n_slots {
        if coin.sample(rng) {
            run += 1;
            successes += 1;
        } else if run > 0 {
            covered += run as u64;
            if run <= k_max {
                counts[run - 1] += 1;
            }
            run = 0;
        }
    }
    if run > 0 {
        covered += run as u64;
        if run <= k_max {
            counts[run - 1] += 1;
        }
    }
    debug_assert_eq!(covered, successes, "runs must partition the successes");
}

fn run_batch(seed: u64, batch: u64, trials: u64, p: f64, n_slots: u64, k_max: usize) -> Moments {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    let coin = Bernoulli::new(p).expect("probability validated");
    let first = batch * BATCH_TRIALS;
    let last = (first + BATCH_TRIALS).min(trials);
    let mut m = Moments::new(k_max);
    let mut counts = vec![0u64; k_max];
    for _ in first..last {
        simulate_trial(&mut rng, &coin, n_slots, &mut counts);
        for (i, &c) in counts.iter().enumerate() {
            m.sum[i] += c as u128;
            m.sum_sq[i] += (c as u128) * (c as u128);
        }
    }
    m
}

/// Monte Carlo estimate of the expected run counts for one entity.
///
/// Bit-identical for a given `(p, n_slots, k_max, trials, seed)` regardless
/// of the rayon pool size: batches use fixed substreams and the moments are
/// summed exactly in integers.
pub fn expected_runs_mc(
    p: f64,
    n_slots: u64,
    k_max: usize,
    trials: u64,
    seed: u64,
) -> Result<EntityExpectation, ExpectationError> {
    check_probability(p)?;
    if n_slots == 0 {
        return Err(ExpectationError::NoSlots);
    }
    if trials == 0 {
        return Err(ExpectationError::NoTrials);
    }
    if k_max == 0 {
        return Err(ExpectationError::NoKMax);
    }
    let moments = if p == 0.0 {
        Moments::new(k_max)
    } else {
        let batches = trials.div_ceil(BATCH_TRIALS);
        (0..batches)
            .into_par_iter()
            .map(|b| run_batch(seed, b, trials, p, n_slots, k_max))
            .reduce(|| Moments::new(k_max), Moments::merge)
    };

    let t = trials as f64;
    let cells = (0..k_max)
        .map(|i| {
            let (sum, sum_sq) = (moments.sum[i], moments.sum_sq[i]);
            let sd = if trials > 1 {
                let numerator = (trials as u128 * sum_sq - sum * sum) as f64;
                (numerator / (t * (t - 1.0))).sqrt()
            } else {
                0.0
            };
            ExpectationCell {
                k: i + 1,
                expected: sum as f64 / t,
                stderr: sd / t.sqrt(),
                sd,
            }
        })
        .collect();
    Ok(EntityExpectation {
        p,
        seed,
        trials,
        n_slots,
        cells,
    })
}

/// Per-entity seed: SHA-256 of the master seed and the entity name.
pub fn derive_entity_seed(master: u64, entity: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(entity.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// One Monte Carlo row set per builder entity in `shares`. Entities are
/// simulated independently; their shares are not jointly constrained.
pub fn expected_all_entities(
    shares: &MarketShare,
    n_slots: u64,
    k_max: usize,
    trials: u64,
    seed: u64,
) -> Result<ExpectationTable, ExpectationError> {
    let mut entities = BTreeMap::new();
    for (name, p) in shares.iter() {
        let row = expected_runs_mc(p, n_slots, k_max, trials, derive_entity_seed(seed, name))?;
        entities.insert(name.to_owned(), row);
    }
    Ok(ExpectationTable {
        n_slots,
        k_max,
        trials,
        seed,
        entities,
    })
}
