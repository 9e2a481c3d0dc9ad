//! Offline replay of flight logs through the detector, scoring against the
//! ground-truth annotation, and one-at-a-time parameter sweeps.

mod log;
mod stats;
mod sweep;

pub use log::{load_log, FlightLog, GroundTruth, LogHeader, COLUMNS};
pub use stats::{quantile, BoxStats};
pub use sweep::{
    read_results_csv, render_table, summarize, sweep, write_results_csv, write_summary_csv, ParameterSet, ResultRow, SummaryRow,
    SweepResults, SweepSpec, Variation,
};

use crate::config::DetectorConfig;
use crate::detector::{Detector, DetectorOutput};
use crate::error::{Error, Result};

/// Replays every sample of `log` through a fresh detector.
pub fn run_detector(log: &FlightLog, config: &DetectorConfig) -> Result<Vec<DetectorOutput>> {
    let expected = 1.0 / config.sensor_interval;
    let rate = log.header.sample_rate_hz;
    if (rate - expected).abs() > 0.01 * expected {
        return Err(Error::InvalidConfig(format!(
            "log sampled at {rate} Hz but sensor_interval implies {expected} Hz"
        )));
    }
    Detector::new(*config)?.process_all(&log.samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationResult {
    /// Seconds from the fault to the latch of the failed actuator.
    pub detection_delay: Option<f64>,
    pub false_alarm_count: usize,
    pub missed_detection: bool,
    /// One-based index of the earliest latched actuator.
    pub detected_actuator: Option<usize>,
}

/// Scores a detector output stream.
///
/// Any latch of an actuator other than the failed one is a false alarm (every
/// latch is, when there is no fault). The fault is missed when the failed
/// actuator never latches.
pub fn evaluate(outputs: &[DetectorOutput], ground_truth: Option<GroundTruth>) -> Result<EvaluationResult> {
    let (Some(first), Some(last)) = (outputs.first(), outputs.last()) else {
        return Err(Error::InvalidArgument("no detector outputs to evaluate".into()));
    };
    if let Some(gt) = ground_truth {
        if gt.time < first.timestamp || gt.time > last.timestamp {
            return Err(Error::InvalidArgument(format!(
                "fault time {} s outside log span [{}, {}] s",
                gt.time, first.timestamp, last.timestamp
            )));
        }
    }
    let status = last.status;
    let failed_index = ground_truth.map(|gt| gt.actuator - 1);

    let mut false_alarm_count = 0;
    let mut detection_delay = None;
    let mut earliest: Option<(f64, usize)> = None;
    for i in status.failed_indices() {
        let t = status.first_detection_time[i].expect("latched actuators carry a time");
        if Some(i) == failed_index {
            detection_delay = ground_truth.map(|gt| t - gt.time);
        } else {
            false_alarm_count += 1;
        }
        let better = match earliest {
            None => true,
            Some((te, ie)) => t < te || (t == te && Some(i) == failed_index && Some(ie) != failed_index),
        };
        if better {
            earliest = Some((t, i));
        }
    }

    Ok(EvaluationResult {
        detection_delay,
        false_alarm_count,
        missed_detection: ground_truth.is_some() && detection_delay.is_none(),
        detected_actuator: earliest.map(|(_, i)| i + 1),
    })
}
