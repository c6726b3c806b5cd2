use super::{check_probability, ExpectationError};

/// Expected number of maximal success runs of exactly length `k` in
/// `n_slots` i.i.d. Bernoulli(p) trials.
///
/// A run of length `k < n` either touches one end of the sequence (two
/// placements, one bounding failure) or sits in the interior (`n - k - 1`
/// placements, two bounding failures):
/// `p^k [(n - k - 1)(1 - p)^2 + 2(1 - p)]`. For `k = n` it is `p^n`.
pub fn expected_runs_exact(p: f64, n_slots: u64, k: u64) -> Result<f64, ExpectationError> {
    check_probability(p)?;
    if n_slots == 0 {
        return Err(ExpectationError::NoSlots);
    }
    if k == 0 || k > n_slots {
        return Err(ExpectationError::RunLength { k, n_slots });
    }
    let pk = pow(p, k);
    if k == n_slots {
        return Ok(pk);
    }
    let q = 1.0 - p;
    let interior = (n_slots - k - 1) as f64;
    Ok(pk * (interior * q * q + 2.0 * q))
}

fn pow(base: f64, exp: u64) -> f64 {
    match i32::try_from(exp) {
        Ok(e) => base.powi(e),
        Err(_) => base.powf(exp as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_probability() {
        for k in 1..=5 {
            assert_eq!(expected_runs_exact(0.0, 5, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn certain_success_is_one_run() {
        assert_eq!(expected_runs_exact(1.0, 4, 4).unwrap(), 1.0);
        for k in 1..4 {
            assert_eq!(expected_runs_exact(1.0, 4, k).unwrap(), 0.0);
        }
    }

    #[test]
    fn fair_coin_four_slots() {
        // 12 maximal singleton runs across the 16 outcomes
        assert!((expected_runs_exact(0.5, 4, 1).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(expected_runs_exact(1.5, 4, 1).is_err());
        assert!(expected_runs_exact(f64::NAN, 4, 1).is_err());
        assert!(expected_runs_exact(0.5, 4, 0).is_err());
        assert!(expected_runs_exact(0.5, 4, 5).is_err());
        assert!(expected_runs_exact(0.5, 0, 1).is_err());
    }
}
