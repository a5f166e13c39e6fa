use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::envs::Trajectory;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `(C_π + ε) / (κ + ε)`.
pub fn normalized_cost<T: Scalar>(cost: T, kappa: T, epsilon: T) -> Result<T> {
    if !(cost >= T::zero()) || !(kappa >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "normalized_cost needs C_pi >= 0 and kappa >= 0, got {cost} and {kappa}"
        )));
    }
    if !(epsilon > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "normalized_cost needs epsilon > 0, got {epsilon}"
        )));
    }
    Ok((cost + epsilon) / (kappa + epsilon))
}

/// Min-max return range of a source corpus plus the task's cost threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub r_min: f64,
    pub r_max: f64,
    pub kappa: f64,
}

impl NormalizationStats {
    pub fn new(r_min: f64, r_max: f64, kappa: f64) -> Result<Self> {
        if !(r_max > r_min) {
            return Err(Error::InvalidArgument(format!(
                "degenerate normalization range [{r_min}, {r_max}]"
            )));
        }
        Ok(Self { r_min, r_max, kappa })
    }

    pub fn from_corpus<T: Scalar>(corpus: &[Trajectory<T>], kappa: f64) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("normalization corpus"));
        }
        let (lo, hi) = corpus.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
            let r = t.cumulative_reward.as_f64();
            (lo.min(r), hi.max(r))
        });
        Self::new(lo, hi, kappa)
    }
}

/// `(R_π − r_min) / (r_max − r_min)`; not clamped to `[0, 1]`.
pub fn normalized_reward<T: Scalar>(reward: T, stats: &NormalizationStats) -> Result<T> {
    if !(stats.r_max > stats.r_min) {
        return Err(Error::InvalidArgument(format!(
            "degenerate normalization range [{}, {}]",
            stats.r_min, stats.r_max
        )));
    }
    Ok((reward - T::lit(stats.r_min)) / T::lit(stats.r_max - stats.r_min))
}

/// Mean of the worst `⌈(1−α)·n⌉` values (largest first).
pub fn cvar<T: Scalar>(values: &[T], alpha: T) -> Result<T> {
    if values.is_empty() {
        return Err(Error::Empty("cvar values"));
    }
    if !(alpha > T::zero() && alpha < T::one()) {
        return Err(Error::InvalidArgument(format!("cvar alpha must be in (0,1), got {alpha}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    let k = (((T::one() - alpha) * T::from_usize_lossy(n)).as_f64().ceil() as usize).clamp(1, n);
    let tail: T = sorted[..k].iter().copied().sum();
    Ok(tail / T::from_usize_lossy(k))
}

pub fn safety_fraction(reports: &[EvalReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.is_safe).count() as f64 / reports.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn normalized_cost_reference_values() {
        let z = normalized_cost(0.0f64, 40.0, 1e-3).unwrap();
        assert!((z - 1e-3 / 40.001).abs() < 1e-18);
        assert!((z - 2.49994e-5).abs() < 1e-10);
        let car_run = normalized_cost(34.84f64, 40.0, 1e-3).unwrap();
        assert!((car_run - 34.841 / 40.001).abs() < 1e-15);
        assert!((car_run - 0.871_003_224_9).abs() < 1e-9);
        assert!((car_run - 0.87098).abs() < 1e-4);
        assert_eq!(normalized_cost(40.0f64, 40.0, 1e-3).unwrap(), 1.0);
        assert!(normalized_cost(-1.0, 40.0, 1e-3).is_err());
        assert!(normalized_cost(1.0, -40.0, 1e-3).is_err());
        assert!(normalized_cost(1.0, 40.0, 0.0).is_err());
    }

    #[test]
    fn normalized_reward_is_linear() {
        let s = NormalizationStats::new(-10.0, 30.0, 5.0).unwrap();
        assert_eq!(normalized_reward(-10.0, &s).unwrap(), 0.0);
        assert_eq!(normalized_reward(30.0, &s).unwrap(), 1.0);
        assert_eq!(normalized_reward(10.0, &s).unwrap(), 0.5);
        assert!(NormalizationStats::new(1.0, 1.0, 5.0).is_err());
        let bad = NormalizationStats { r_min: 2.0, r_max: 1.0, kappa: 1.0 };
        assert!(normalized_reward(1.0, &bad).is_err());
    }

    #[test]
    fn cvar_cases() {
        assert_eq!(cvar(&[3.5; 7], 0.3).unwrap(), 3.5);
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(cvar(&v, 0.9).unwrap(), 10.0);
        assert_eq!(cvar(&v, 0.5).unwrap(), 8.0);
        assert!(cvar::<f64>(&[], 0.9).is_err());
        assert!(cvar(&v, 1.0).is_err());
    }

    #[test]
    fn safety_fraction_counts() {
        let mk = |safe| EvalReport {
            is_safe: safe,
            ..EvalReport::default()
        };
        assert_eq!(safety_fraction(&[mk(true), mk(true)]), 1.0);
        assert_eq!(safety_fraction(&[mk(false)]), 0.0);
        let f = safety_fraction(&[mk(true), mk(false), mk(true)]);
        assert!((f - 2.0 / 3.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn threshold_law(c in 0.0f64..200.0, k in 0.0f64..200.0) {
            let n = normalized_cost(c, k, 1e-3).unwrap();
            prop_assert_eq!(n <= 1.0, c <= k);
        }

        #[test]
        fn monotone_in_cost_and_threshold(c in 0.0f64..100.0, k in 0.0f64..100.0, d in 1e-3f64..10.0) {
            let base = normalized_cost(c, k, 1e-3).unwrap();
            prop_assert!(normalized_cost(c + d, k, 1e-3).unwrap() > base);
            prop_assert!(normalized_cost(c, k + d, 1e-3).unwrap() < base);
        }

        #[test]
        fn cvar_dominates_mean(v in proptest::collection::vec(-50.0f64..50.0, 1..60), a in 0.01f64..0.99) {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            prop_assert!(cvar(&v, a).unwrap() >= mean - 1e-9);
        }
    }
}
