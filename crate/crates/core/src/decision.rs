//! Per-actuator hypothesis test on the effectiveness estimates.
//!
//! Each estimate is treated as Gaussian with the estimator variance; the
//! failure probability is the lower-tail mass below `k_threshold`. An actuator
//! is declared failed once that probability strictly exceeds
//! `probability_threshold`, and stays failed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionConfig {
    pub k_threshold: f64,
    pub probability_threshold: f64,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            k_threshold: 0.25,
            probability_threshold: 0.9,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_threshold > 0.0 && self.k_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decision.k_threshold must lie in (0, 1), got {}",
                self.k_threshold
            )));
        }
        if !(self.probability_threshold > 0.5 && self.probability_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decision.probability_threshold must lie in (0.5, 1), got {}",
                self.probability_threshold
            )));
        }
        Ok(())
    }
}

/// `P(k < k_threshold)` for `k ~ N(k_hat, variance)`.
///
/// Zero variance degenerates to the indicator `k_hat < k_threshold`, with 0.5
/// at equality.
pub fn failure_probability(k_hat: f64, variance: f64, k_threshold: f64) -> Result<f64> {
    if variance.is_nan() || variance < 0.0 {
        return Err(Error::InvalidArgument(format!("variance must be >= 0, got {variance}")));
    }
    if k_hat.is_nan() || k_threshold.is_nan() {
        return Err(Error::NonFinite("failure probability input"));
    }
    let diff = k_threshold - k_hat;
    if variance == 0.0 {
        return Ok(match diff.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => 0.0,
            _ => 0.5,
        });
    }
    // Phi(u) = erfc(-u / sqrt 2) / 2 keeps full relative accuracy in the
    // lower tail.
    let u = diff / variance.sqrt();
    Ok(0.5 * libm::erfc(-u / std::f64::consts::SQRT_2))
}

pub fn failure_probabilities(k_hat: &[f64; 4], variances: &[f64; 4], k_threshold: f64) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = failure_probability(k_hat[i], variances[i], k_threshold)?;
    }
    Ok(out)
}

/// Latched per-actuator failure flags.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DetectionStatus {
    pub failed: [bool; 4],
    pub first_detection_time: [Option<f64>; 4],
}

impl DetectionStatus {
    pub fn any_failed(&self) -> bool {
        self.failed.iter().any(|&f| f)
    }

    /// Zero-based indices of latched actuators.
    pub fn failed_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.failed.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i)
    }
}

pub fn decide(probs: &[f64; 4], status: &DetectionStatus, config: &DecisionConfig, now: f64) -> DetectionStatus {
    let mut next = *status;
    for i in 0..4 {
        if !next.failed[i] && probs[i] > config.probability_threshold {
            next.failed[i] = true;
            next.first_detection_time[i] = Some(now);
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_point_is_one_half() {
        for v in [1e-8, 0.01, 1.0, 1e6] {
            assert_eq!(failure_probability(0.25, v, 0.25).unwrap(), 0.5);
        }
        assert_eq!(failure_probability(0.25, 0.0, 0.25).unwrap(), 0.5);
    }

    #[test]
    fn far_tail_underflows_to_zero() {
        let p = failure_probability(1.0, 1e-4, 0.25).unwrap();
        assert!(p < 1e-300);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn one_and_a_half_sigma() {
        // Phi(1.5) from standard normal tables
        let p = failure_probability(0.1, 0.01, 0.25).unwrap();
        assert!((p - 0.933_192_798_731_142).abs() < 1e-5, "{p}");
    }

    #[test]
    fn degenerate_variance() {
        assert_eq!(failure_probability(0.1, 0.0, 0.25).unwrap(), 1.0);
        assert_eq!(failure_probability(0.9, 0.0, 0.25).unwrap(), 0.0);
    }

    #[test]
    fn negative_variance_rejected() {
        assert!(failure_probability(0.5, -1e-9, 0.25).is_err());
        assert!(failure_probability(0.5, f64::NAN, 0.25).is_err());
    }

    #[test]
    fn latch_examples() {
        let cfg = DecisionConfig::default();
        let s = decide(&[0.0, 0.0, 0.95, 0.0], &DetectionStatus::default(), &cfg, 1.66);
        assert_eq!(s.failed, [false, false, true, false]);
        assert_eq!(s.first_detection_time[2], Some(1.66));
        assert_eq!(s.first_detection_time[0], None);

        let s2 = decide(&[0.0, 0.0, 0.1, 0.0], &s, &cfg, 1.68);
        assert_eq!(s2, s);

        let s3 = decide(&[0.9, 0.9, 0.9, 0.9], &DetectionStatus::default(), &cfg, 0.0);
        assert!(!s3.any_failed());
    }

    #[test]
    fn config_bounds() {
        assert!(DecisionConfig::default().validate().is_ok());
        assert!(DecisionConfig { k_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(DecisionConfig { probability_threshold: 0.5, ..Default::default() }.validate().is_err());
    }
}
