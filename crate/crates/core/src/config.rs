//! Detector configuration and its TOML file form.
//!
//! ```toml
//! estimator_interval = 0.02        # s, Kalman/decision rate
//! sensor_interval = 0.002          # s, input sample rate
//! takeoff_thrust_fraction = 0.5    # of hover_reference
//! hover_reference = 1962000.0      # sum of w_i^2 at hover, (rad/s)^2
//! takeoff_window = 1.0             # s, moving-average length for the gate
//! initial_variance = 1.0
//!
//! [gains]
//! g_p = 0.0001
//! g_q = 0.0001
//! g_az = 5e-6
//!
//! [filter]
//! natural_frequency = 50.0
//! damping_ratio = 0.55
//!
//! [noise]
//! process_noise_q = 0.1
//! measurement_noise_r = 1.0
//!
//! [decision]
//! k_threshold = 0.25
//! probability_threshold = 0.9
//! ```
//!
//! Every key is optional in a file; missing keys take the defaults above.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::DecisionConfig;
use crate::error::{Error, Result};
use crate::estimator::{NoiseConfig, DEFAULT_INITIAL_VARIANCE};
use crate::model::EffectivenessGains;
use crate::signal::FilterDesign;

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowPass {
    pub natural_frequency: f64,
    pub damping_ratio: f64,
}

impl Default for LowPass {
    fn default() -> Self {
        let d = FilterDesign::default();
        Self {
            natural_frequency: d.natural_frequency,
            damping_ratio: d.damping_ratio,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub estimator_interval: f64,
    pub sensor_interval: f64,
    pub takeoff_thrust_fraction: f64,
    pub hover_reference: f64,
    pub takeoff_window: f64,
    pub initial_variance: f64,
    pub gains: EffectivenessGains,
    pub filter: LowPass,
    pub noise: NoiseConfig,
    pub decision: DecisionConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let gains = EffectivenessGains::default();
        Self {
            estimator_interval: 0.02,
            sensor_interval: 0.002,
            takeoff_thrust_fraction: 0.5,
            // hover: G_az * sum(w^2) = g
            hover_reference: GRAVITY / gains.g_az,
            takeoff_window: 1.0,
            initial_variance: DEFAULT_INITIAL_VARIANCE,
            gains,
            filter: LowPass::default(),
            noise: NoiseConfig::default(),
            decision: DecisionConfig::default(),
        }
    }
}

/// Names accepted by [`DetectorConfig::set_parameter`].
pub const PARAMETERS: &[&str] = &[
    "gains.g_p",
    "gains.g_q",
    "gains.g_az",
    "noise.process_noise_q",
    "noise.measurement_noise_r",
    "decision.k_threshold",
    "decision.probability_threshold",
    "filter.natural_frequency",
    "filter.damping_ratio",
    "estimator_interval",
    "sensor_interval",
    "takeoff_thrust_fraction",
    "hover_reference",
    "takeoff_window",
    "initial_variance",
];

impl DetectorConfig {
    pub fn filter_design(&self) -> FilterDesign {
        FilterDesign {
            natural_frequency: self.filter.natural_frequency,
            damping_ratio: self.filter.damping_ratio,
            sample_interval: self.sensor_interval,
        }
    }

    /// Number of sensor samples per estimator tick.
    pub fn tick_ratio(&self) -> Result<usize> {
        let si = self.sensor_interval;
        let ei = self.estimator_interval;
        if !(si.is_finite() && si > 0.0) {
            return Err(Error::InvalidConfig(format!("sensor_interval must be > 0, got {si}")));
        }
        if !(ei.is_finite() && ei > 0.0) {
            return Err(Error::InvalidConfig(format!("estimator_interval must be > 0, got {ei}")));
        }
        let ratio = ei / si;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 * n {
            return Err(Error::InvalidConfig(format!(
                "estimator_interval {ei} s is not an integer multiple of sensor_interval {si} s"
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self) -> Result<()> {
        self.tick_ratio()?;
        self.gains.validate()?;
        self.filter_design().validate()?;
        self.noise.validate()?;
        self.decision.validate()?;
        let f = self.takeoff_thrust_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "takeoff_thrust_fraction must lie in (0, 1), got {f}"
            )));
        }
        if !(self.hover_reference.is_finite() && self.hover_reference > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "hover_reference must be > 0, got {}",
                self.hover_reference
            )));
        }
        if !(self.takeoff_window.is_finite() && self.takeoff_window >= self.sensor_interval) {
            return Err(Error::InvalidConfig(format!(
                "takeoff_window must be at least one sensor interval, got {}",
                self.takeoff_window
            )));
        }
        if !(self.initial_variance.is_finite() && self.initial_variance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial_variance must be >= 0, got {}",
                self.initial_variance
            )));
        }
        Ok(())
    }

    pub fn get_parameter(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "gains.g_p" => self.gains.g_p,
            "gains.g_q" => self.gains.g_q,
            "gains.g_az" => self.gains.g_az,
            "noise.process_noise_q" => self.noise.process_noise_q,
            "noise.measurement_noise_r" => self.noise.measurement_noise_r,
            "decision.k_threshold" => self.decision.k_threshold,
            "decision.probability_threshold" => self.decision.probability_threshold,
            "filter.natural_frequency" => self.filter.natural_frequency,
            "filter.damping_ratio" => self.filter.damping_ratio,
            "estimator_interval" => self.estimator_interval,
            "sensor_interval" => self.sensor_interval,
            "takeoff_thrust_fraction" => self.takeoff_thrust_fraction,
            "hover_reference" => self.hover_reference,
            "takeoff_window" => self.takeoff_window,
            "initial_variance" => self.initial_variance,
            _ => return Err(Error::UnknownParameter(name.to_owned())),
        })
    }

    pub fn set_parameter(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "gains.g_p" => &mut self.gains.g_p,
            "gains.g_q" => &mut self.gains.g_q,
            "gains.g_az" => &mut self.gains.g_az,
            "noise.process_noise_q" => &mut self.noise.process_noise_q,
            "noise.measurement_noise_r" => &mut self.noise.measurement_noise_r,
            "decision.k_threshold" => &mut self.decision.k_threshold,
            "decision.probability_threshold" => &mut self.decision.probability_threshold,
            "filter.natural_frequency" => &mut self.filter.natural_frequency,
            "filter.damping_ratio" => &mut self.filter.damping_ratio,
            "estimator_interval" => &mut self.estimator_interval,
            "sensor_interval" => &mut self.sensor_interval,
            "takeoff_thrust_fraction" => &mut self.takeoff_thrust_fraction,
            "hover_reference" => &mut self.hover_reference,
            "takeoff_window" => &mut self.takeoff_window,
            "initial_variance" => &mut self.initial_variance,
            _ => return Err(Error::UnknownParameter(name.to_owned())),
        };
        *slot = value;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Toml(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Toml(msg) => Error::Toml(format!("{}: {msg}", path.display())),
            Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}
