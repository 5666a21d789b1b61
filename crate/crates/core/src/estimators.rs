//! RSSI ranging baseline and summary statistics for comparing configurations.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("path loss exponent must be > 0, got {0}")]
    InvalidExponent(f64),
    #[error("cannot summarize an empty sample")]
    EmptySample,
    #[error("degenerate comparison: {0} of the reference is zero")]
    DegenerateComparison(&'static str),
}

/// Inverts the log-distance path-loss model.
pub fn rssi_distance_m(rssi_dbm: f64, a_dbm: f64, n: f64) -> Result<f64, EstimatorError> {
    if !(n > 0.0) {
        return Err(EstimatorError::InvalidExponent(n));
    }
    Ok(10f64.powf((a_dbm - rssi_dbm) / (10.0 * n)))
}

/// Population statistics of a set of range estimates against a known truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangingStats {
    pub n_samples: usize,
    pub mean_est_m: f64,
    pub std_est_m: f64,
    pub mean_abs_error_m: f64,
    pub p90_abs_error_m: f64,
    pub true_distance_m: f64,
}

impl RangingStats {
    /// Signed error of the mean estimate.
    pub fn mean_error_m(&self) -> f64 {
        self.mean_est_m - self.true_distance_m
    }
}

pub fn summarize(estimates: &[f64], true_distance_m: f64) -> Result<RangingStats, EstimatorError> {
    if estimates.is_empty() {
        return Err(EstimatorError::EmptySample);
    }
    let n = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / n;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;

    let mut abs_err: Vec<f64> = estimates.iter().map(|x| (x - true_distance_m).abs()).collect();
    abs_err.sort_by(f64::total_cmp);
    let mae = abs_err.iter().sum::<f64>() / n;
    // nearest rank: ceil(0.9 n), 1-based
    let rank = (estimates.len() * 9).div_ceil(10).max(1);
    let p90 = abs_err[rank - 1];

    Ok(RangingStats {
        n_samples: estimates.len(),
        mean_est_m: mean,
        std_est_m: var.sqrt(),
        mean_abs_error_m: mae,
        p90_abs_error_m: p90,
        true_distance_m,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub std_ratio: f64,
    pub mae_ratio: f64,
}

/// Ratios `a / b` of spread and mean absolute error.
pub fn compare(a: &RangingStats, b: &RangingStats) -> Result<ComparisonReport, EstimatorError> {
    if b.std_est_m == 0.0 {
        return Err(EstimatorError::DegenerateComparison("std"));
    }
    if b.mean_abs_error_m == 0.0 {
        return Err(EstimatorError::DegenerateComparison("mean absolute error"));
    }
    Ok(ComparisonReport {
        std_ratio: a.std_est_m / b.std_est_m,
        mae_ratio: a.mean_abs_error_m / b.mean_abs_error_m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phy::{rssi_at, ChannelModel, SimRng};
    use proptest::prelude::*;

    #[test]
    fn rssi_inversion_examples() {
        assert!((rssi_distance_m(-40.0, -40.0, 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((rssi_distance_m(-60.0, -40.0, 2.0).unwrap() - 10.0).abs() < 1e-12);
        assert!((rssi_distance_m(-50.0, -40.0, 2.0).unwrap() - 3.16227766).abs() < 1e-6);
        assert_eq!(rssi_distance_m(-50.0, -40.0, 0.0), Err(EstimatorError::InvalidExponent(0.0)));
        assert!(rssi_distance_m(-50.0, -40.0, -1.0).is_err());
    }

    #[test]
    fn summarize_examples() {
        let s = summarize(&[10.0, 10.0, 10.0], 10.0).unwrap();
        assert_eq!((s.mean_est_m, s.std_est_m, s.mean_abs_error_m), (10.0, 0.0, 0.0));
        let s = summarize(&[9.0, 11.0], 10.0).unwrap();
        assert_eq!((s.mean_est_m, s.std_est_m, s.mean_abs_error_m), (10.0, 1.0, 1.0));
        assert_eq!(summarize(&[], 1.0), Err(EstimatorError::EmptySample));
    }

    #[test]
    fn p90_nearest_rank() {
        // errors 1..=10: rank ceil(9) = 9 -> 9
        let est: Vec<f64> = (1..=10).map(|e| 100.0 + e as f64).collect();
        assert_eq!(summarize(&est, 100.0).unwrap().p90_abs_error_m, 9.0);
        // n = 11: rank ceil(9.9) = 10
        let est: Vec<f64> = (1..=11).map(|e| 100.0 - e as f64).collect();
        assert_eq!(summarize(&est, 100.0).unwrap().p90_abs_error_m, 10.0);
        assert_eq!(summarize(&[3.0], 1.0).unwrap().p90_abs_error_m, 2.0);
    }

    #[test]
    fn compare_examples() {
        let mk = |std, mae| RangingStats {
            n_samples: 10,
            mean_est_m: 1.0,
            std_est_m: std,
            mean_abs_error_m: mae,
            p90_abs_error_m: mae,
            true_distance_m: 1.0,
        };
        let r = compare(&mk(2.0, 3.0), &mk(1.0, 1.5)).unwrap();
        assert_eq!((r.std_ratio, r.mae_ratio), (2.0, 2.0));
        let r = compare(&mk(0.7, 0.4), &mk(0.7, 0.4)).unwrap();
        assert_eq!((r.std_ratio, r.mae_ratio), (1.0, 1.0));
        assert!(matches!(compare(&mk(1.0, 1.0), &mk(0.0, 1.0)), Err(EstimatorError::DegenerateComparison(_))));
        assert!(compare(&mk(1.0, 1.0), &mk(1.0, 0.0)).is_err());
    }

    #[test]
    fn uniform_quantization_mae_scales_with_period() {
        // Brute-force oracle: ranging error from one-sided uniform quantization
        // over the sampling period, centered by its mean.
        let mut rng = SimRng::new(77);
        let mut mae = |ts_ns: f64| {
            let est: Vec<f64> = (0..10_000)
                .map(|_| 5.0 + (rng.uniform(ts_ns) - ts_ns / 2.0) * 0.15)
                .collect();
            summarize(&est, 5.0).unwrap().mean_abs_error_m
        };
        let ratio = mae(50.0) / mae(25.0);
        assert!((ratio - 2.0).abs() <= 0.4, "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn rssi_round_trip(d in 0.1f64..100.0, n in 1.5f64..4.0, a in -60.0f64..-20.0) {
            let ch = ChannelModel {
                pathloss_exponent_n: n,
                rssi_ref_dbm_a: a,
                ref_tx_power_dbm: 20.0,
                multipath_mean_excess_ns: 0.0,
                fac_residual: 0.0,
                rssi_noise_db_std: 0.0,
            };
            let rssi = rssi_at(d, &ch, 20.0, &mut SimRng::new(0)).unwrap();
            let back = rssi_distance_m(rssi, a, n).unwrap();
            prop_assert!(((back - d) / d).abs() < 1e-9);
        }

        #[test]
        fn summarize_permutation_invariant(mut xs in prop::collection::vec(-50.0f64..50.0, 1..40), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = summarize(&xs, 3.0).unwrap();
            xs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let b = summarize(&xs, 3.0).unwrap();
            prop_assert!((a.mean_est_m - b.mean_est_m).abs() < 1e-9);
            prop_assert!((a.std_est_m - b.std_est_m).abs() < 1e-9);
            prop_assert!((a.mean_abs_error_m - b.mean_abs_error_m).abs() < 1e-9);
            prop_assert_eq!(a.p90_abs_error_m, b.p90_abs_error_m);
            prop_assert!(a.std_est_m >= 0.0 && a.p90_abs_error_m >= 0.0);
        }
    }
}
