use std::collections::BTreeMap;

use serde::Serialize;

use super::{Run, RunError};
use crate::trace_model::Wei;

/// Slope per position above which a run counts as escalating.
pub const DEFAULT_ESCALATION_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Escalation {
    /// Least-squares slope of payment/baseline against position.
    pub slope: f64,
    pub flagged: bool,
}

/// Ordinary least-squares slope of `ys` against positions `1..=n`.
pub fn least_squares_slope(ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    if ys.len() < 2 {
        return 0.0;
    }
    let x_mean = (n + 1.0) / 2.0;
    let y_mean = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in ys.iter().enumerate() {
        let dx = (i + 1) as f64 - x_mean;
        sxy += dx * (y - y_mean);
        sxx += dx * dx;
    }
    sxy / sxx
}

/// How fast a run's relative premium over the per-slot median grows with
/// position. A level premium has slope zero.
pub fn escalation_index(
    run: &Run,
    baselines: &BTreeMap<u64, Wei>,
    threshold: f64,
) -> Result<Escalation, RunError> {
    if run.length() < 2 {
        return Err(RunError::RunTooShort {
            length: run.length(),
        });
    }
    let premiums = run
        .slots()
        .zip(&run.payments)
        .map(|(slot, payment)| match baselines.get(&slot) {
            None => Err(RunError::MissingBaseline { slot }),
            Some(Wei(0)) => Err(RunError::ZeroBaseline { slot }),
            Some(b) => Ok(payment.as_f64() / b.as_f64()),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let slope = least_squares_slope(&premiums);
    Ok(Escalation {
        slope,
        flagged: slope > threshold,
    })
}
