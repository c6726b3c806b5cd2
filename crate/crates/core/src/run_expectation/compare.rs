use std::collections::BTreeSet;

use serde::Serialize;

use super::ExpectationTable;
use crate::run_analysis::RunHistogram;

/// Expected counts below this are treated as zero when forming ratios.
pub const RATIO_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub entity: String,
    pub k: usize,
    pub observed: u64,
    pub expected: f64,
    pub stderr: f64,
    pub sd: f64,
    /// `observed / expected`; `None` when expected is (near) zero.
    pub ratio: Option<f64>,
    /// `(observed - expected) / sqrt(sd^2 + stderr^2)`; `None` when that
    /// spread is zero.
    pub z: Option<f64>,
}

impl ComparisonRow {
    pub fn new(entity: &str, k: usize, observed: u64, expected: f64, stderr: f64, sd: f64) -> Self {
        let ratio = (expected >= RATIO_EPSILON).then(|| observed as f64 / expected);
        let spread = (sd * sd + stderr * stderr).sqrt();
        let z = (spread > 0.0).then(|| (observed as f64 - expected) / spread);
        ComparisonRow {
            entity: entity.to_owned(),
            k,
            observed,
            expected,
            stderr,
            sd,
            ratio,
            z,
        }
    }
}

/// One row per (entity, k) for `k <= k_max`, ordered by entity then k.
/// Entities present on only one side get zeros on the other. Runs longer
/// than `k_max` are left out.
pub fn compare_observed_expected(
    observed: &RunHistogram,
    expected: &ExpectationTable,
) -> Vec<ComparisonRow> {
    let entities: BTreeSet<&str> = observed
        .by_entity
        .keys()
        .chain(expected.entities.keys())
        .map(String::as_str)
        .collect();
    let mut rows = Vec::with_capacity(entities.len() * expected.k_max);
    for entity in entities {
        let row_set = expected.entities.get(entity);
        for k in 1..=expected.k_max {
            let cell = row_set.and_then(|r| r.cell(k));
            let (e, se, sd) = cell.map_or((0.0, 0.0, 0.0), |c| (c.expected, c.stderr, c.sd));
            rows.push(ComparisonRow::new(
                entity,
                k,
                observed.count(entity, k),
                e,
                se,
                sd,
            ));
        }
    }
    rows
}
