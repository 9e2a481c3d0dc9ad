//! The full detection chain: filter every sample, and on each estimator tick
//! difference the rates, build the observation, step the estimator and run
//! the hypothesis test. Nothing downstream of the filters runs until the
//! takeoff gate has armed.

use std::time::Instant;

use serde::Serialize;

use crate::config::DetectorConfig;
use crate::decision::{decide, failure_probabilities, DetectionStatus};
use crate::error::{Error, Result};
use crate::estimator::EstimatorState;
use crate::model::observation_matrix;
use crate::signal::{differentiate, FilterBank, FilteredSample, RawSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorOutput {
    pub timestamp: f64,
    /// Whether the estimator clock ticked on this sample.
    pub tick: bool,
    pub armed: bool,
    pub k_hat: [f64; 4],
    pub variances: [f64; 4],
    pub p_fail: [f64; 4],
    pub status: DetectionStatus,
}

/// One-way arming on the moving average of filtered `sum(w_i^2)`.
#[derive(Debug, Clone)]
struct TakeoffGate {
    window: Vec<f64>,
    next: usize,
    sum: f64,
    threshold: f64,
}

impl TakeoffGate {
    fn new(config: &DetectorConfig) -> Self {
        let len = ((config.takeoff_window / config.sensor_interval).round() as usize).max(1);
        Self {
            window: vec![0.0; len],
            next: 0,
            sum: 0.0,
            threshold: config.takeoff_thrust_fraction * config.hover_reference,
        }
    }

    fn push(&mut self, thrust_proxy: f64) -> bool {
        self.sum += thrust_proxy - self.window[self.next];
        self.window[self.next] = thrust_proxy;
        self.next = (self.next + 1) % self.window.len();
        self.sum / self.window.len() as f64 > self.threshold
    }
}

#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    tick_ratio: usize,
    filters: FilterBank,
    gate: TakeoffGate,
    armed: bool,
    estimator: EstimatorState,
    status: DetectionStatus,
    p_fail: [f64; 4],
    last_tick: Option<FilteredSample>,
    last_timestamp: Option<f64>,
    samples_seen: u64,
}

impl Detector {
    pub fn new(config: DetectorConfig) -> Result<Self> {
        config.validate()?;
        let estimator = EstimatorState::init([1.0; 4], config.initial_variance)?;
        let p_fail = failure_probabilities(&estimator.x, &estimator.variances(), config.decision.k_threshold)?;
        Ok(Self {
            tick_ratio: config.tick_ratio()?,
            filters: FilterBank::new(&config.filter_design())?,
            gate: TakeoffGate::new(&config),
            armed: false,
            estimator,
            status: DetectionStatus::default(),
            p_fail,
            last_tick: None,
            last_timestamp: None,
            samples_seen: 0,
            config,
        })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn is_armed(&self) -> bool {
        self.armed
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.estimator
    }

    pub fn status(&self) -> &DetectionStatus {
        &self.status
    }

    pub fn process_sample(&mut self, raw: &RawSample) -> Result<DetectorOutput> {
        if !raw.is_finite() {
            return Err(Error::NonFinite("sensor sample"));
        }
        if raw.rotor_speeds.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "negative rotor speed at t = {} s",
                raw.timestamp
            )));
        }
        if let Some(previous) = self.last_timestamp {
            if raw.timestamp <= previous {
                return Err(Error::NonMonotoneTime {
                    previous,
                    current: raw.timestamp,
                });
            }
        }

        let mut filtered = self.filters.step(raw);
        let thrust_proxy: f64 = filtered.rotor_speeds.iter().map(|w| w * w).sum();
        if self.gate.push(thrust_proxy) {
            self.armed = true;
        }

        let tick = self.samples_seen.is_multiple_of(self.tick_ratio as u64);
        if tick {
            filtered.angular_accel = differentiate(self.last_tick.as_ref(), &filtered)?;
            self.last_tick = Some(filtered);
            if self.armed {
                self.estimate(&filtered)?;
            }
        }

        self.last_timestamp = Some(raw.timestamp);
        self.samples_seen += 1;
        Ok(self.output(raw.timestamp, tick))
    }

    fn estimate(&mut self, filtered: &FilteredSample) -> Result<()> {
        let h = observation_matrix(&self.config.gains, &filtered.rotor_speeds);
        let z = [filtered.angular_accel[0], filtered.angular_accel[1], filtered.accel_z];
        self.estimator = self.estimator.step(&h, &z, &self.config.noise)?;
        self.p_fail = failure_probabilities(
            &self.estimator.x,
            &self.estimator.variances(),
            self.config.decision.k_threshold,
        )?;
        self.status = decide(&self.p_fail, &self.status, &self.config.decision, filtered.timestamp);
        Ok(())
    }

    fn output(&self, timestamp: f64, tick: bool) -> DetectorOutput {
        DetectorOutput {
            timestamp,
            tick,
            armed: self.armed,
            k_hat: self.estimator.x,
            variances: self.estimator.variances(),
            p_fail: self.p_fail,
            status: self.status,
        }
    }

    pub fn process_all(&mut self, samples: &[RawSample]) -> Result<Vec<DetectorOutput>> {
        samples.iter().map(|s| self.process_sample(s)).collect()
    }
}

/// Wall-clock cost of [`Detector::process_sample`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuntimeReport {
    pub samples: usize,
    pub mean_seconds: f64,
    pub p99_seconds: f64,
}

/// Times every sample of `samples` through `detector`.
pub fn measure_runtime(detector: &mut Detector, samples: &[RawSample]) -> Result<RuntimeReport> {
    let mut costs = Vec::with_capacity(samples.len());
    for sample in samples {
        let start = Instant::now();
        let out = detector.process_sample(sample)?;
        costs.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    if costs.is_empty() {
        return Err(Error::InvalidArgument("no samples to time".into()));
    }
    let mean_seconds = costs.iter().sum::<f64>() / costs.len() as f64;
    costs.sort_by(f64::total_cmp);
    let idx = ((costs.len() as f64 * 0.99).ceil() as usize).clamp(1, costs.len()) - 1;
    Ok(RuntimeReport {
        samples: costs.len(),
        mean_seconds,
        p99_seconds: costs[idx],
    })
}
