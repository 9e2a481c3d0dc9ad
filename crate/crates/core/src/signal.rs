//! Input conditioning: a second-order low-pass applied identically to every
//! measured channel, and backward differencing of the filtered body rates.
//!
//! The continuous prototype is
//!
//! ```text
//!            wn^2
//! H(s) = -------------------
//!        s^2 + 2 z wn s + wn^2
//! ```
//!
//! discretized with the bilinear transform prewarped at `wn`, so the digital
//! filter has unit DC gain and the same magnitude as the prototype at `wn`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of filtered channels: p, q, r, a_z and four rotor speeds.
pub const CHANNELS: usize = 8;

/// Continuous low-pass design plus the rate it will run at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterDesign {
    /// rad/s
    pub natural_frequency: f64,
    pub damping_ratio: f64,
    /// s
    pub sample_interval: f64,
}

impl Default for FilterDesign {
    fn default() -> Self {
        Self {
            natural_frequency: 50.0,
            damping_ratio: 0.55,
            sample_interval: 0.002,
        }
    }
}

impl FilterDesign {
    pub fn validate(&self) -> Result<()> {
        let Self {
            natural_frequency: wn,
            damping_ratio: zeta,
            sample_interval: dt,
        } = *self;
        if !(wn.is_finite() && wn > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "filter natural_frequency must be > 0, got {wn}"
            )));
        }
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "filter damping_ratio must lie in (0, 1), got {zeta}"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "filter sample_interval must be > 0, got {dt}"
            )));
        }
        let nyquist = std::f64::consts::PI / dt;
        if wn >= nyquist {
            return Err(Error::InvalidConfig(format!(
                "filter natural_frequency {wn} rad/s is not below Nyquist {nyquist} rad/s"
            )));
        }
        Ok(())
    }
}

/// Normalized biquad: `y = b0 x + b1 x' + b2 x'' - a1 y' - a2 y''`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterCoefficients {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl FilterCoefficients {
    /// Magnitude of the discrete transfer function at `omega` rad/s.
    pub fn magnitude(&self, omega: f64, sample_interval: f64) -> f64 {
        let theta = omega * sample_interval;
        // z^-1 = cos(theta) - j sin(theta)
        let (c1, s1) = (theta.cos(), -theta.sin());
        let (c2, s2) = ((2.0 * theta).cos(), -(2.0 * theta).sin());
        let num_re = self.b[0] + self.b[1] * c1 + self.b[2] * c2;
        let num_im = self.b[1] * s1 + self.b[2] * s2;
        let den_re = 1.0 + self.a[0] * c1 + self.a[1] * c2;
        let den_im = self.a[0] * s1 + self.a[1] * s2;
        (num_re.hypot(num_im)) / (den_re.hypot(den_im))
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Moduli of the two recursion poles.
    pub fn pole_radii(&self) -> [f64; 2] {
        let (a1, a2) = (self.a[0], self.a[1]);
        let disc = a1 * a1 - 4.0 * a2;
        if disc < 0.0 {
            // complex pair, |p|^2 = a2
            let r = a2.sqrt();
            [r, r]
        } else {
            let s = disc.sqrt();
            [((-a1 + s) / 2.0).abs(), ((-a1 - s) / 2.0).abs()]
        }
    }
}

pub fn design_lowpass(design: &FilterDesign) -> Result<FilterCoefficients> {
    design.validate()?;
    let wn = design.natural_frequency;
    let zeta = design.damping_ratio;
    // prewarped bilinear constant, replaces 2/dt
    let k = wn / (wn * design.sample_interval / 2.0).tan();

    let a0 = k * k + 2.0 * zeta * wn * k + wn * wn;
    let a1 = (2.0 * wn * wn - 2.0 * k * k) / a0;
    let a2 = (k * k - 2.0 * zeta * wn * k + wn * wn) / a0;
    // numerator is proportional to (1 + z^-1)^2; pin its scale to the
    // denominator sum so the DC gain is one independent of rounding above.
    let b0 = (1.0 + a1 + a2) / 4.0;
    Ok(FilterCoefficients {
        b: [b0, 2.0 * b0, b0],
        a: [a1, a2],
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Section {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl Section {
    fn warm(value: f64) -> Self {
        Self {
            x1: value,
            x2: value,
            y1: value,
            y2: value,
        }
    }

    #[inline]
    fn step(&mut self, c: &FilterCoefficients, x: f64) -> f64 {
        let y = c.b[0] * x + c.b[1] * self.x1 + c.b[2] * self.x2 - c.a[0] * self.y1 - c.a[1] * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

/// One raw measurement set, as listed for the detector inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawSample {
    pub timestamp: f64,
    /// (p, q, r) rad/s
    pub angular_rate: [f64; 3],
    /// Proper (specific) acceleration along body z, m/s^2.
    pub accel_z: f64,
    /// rad/s
    pub rotor_speeds: [f64; 4],
}

impl RawSample {
    fn channels(&self) -> [f64; CHANNELS] {
        let [p, q, r] = self.angular_rate;
        let [w1, w2, w3, w4] = self.rotor_speeds;
        [p, q, r, self.accel_z, w1, w2, w3, w4]
    }

    pub fn is_finite(&self) -> bool {
        self.timestamp.is_finite() && self.channels().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FilteredSample {
    pub timestamp: f64,
    pub rates: [f64; 3],
    pub accel_z: f64,
    pub rotor_speeds: [f64; 4],
    /// (p-dot, q-dot) rad/s^2, filled in by [`differentiate`].
    pub angular_accel: [f64; 2],
}

/// Per-stream filter memory for all channels. The first sample seeds every
/// channel's memory with its own value so a steady input starts settled.
#[derive(Debug, Clone)]
pub struct FilterBank {
    coefficients: FilterCoefficients,
    sections: [Section; CHANNELS],
    primed: bool,
}

impl FilterBank {
    pub fn new(design: &FilterDesign) -> Result<Self> {
        Ok(Self::from_coefficients(design_lowpass(design)?))
    }

    pub fn from_coefficients(coefficients: FilterCoefficients) -> Self {
        Self {
            coefficients,
            sections: [Section::default(); CHANNELS],
            primed: false,
        }
    }

    pub fn coefficients(&self) -> &FilterCoefficients {
        &self.coefficients
    }

    pub fn reset(&mut self) {
        self.primed = false;
        self.sections = [Section::default(); CHANNELS];
    }

    /// Filters an arbitrary channel vector with the shared coefficients.
    pub fn step_channels(&mut self, input: [f64; CHANNELS]) -> [f64; CHANNELS] {
        if !self.primed {
            for (section, &v) in self.sections.iter_mut().zip(&input) {
                *section = Section::warm(v);
            }
            self.primed = true;
        }
        let mut out = [0.0; CHANNELS];
        for ((section, &x), y) in self.sections.iter_mut().zip(&input).zip(out.iter_mut()) {
            *y = section.step(&self.coefficients, x);
        }
        out
    }

    /// Advances every channel by one sample. `angular_accel` is left at zero.
    pub fn step(&mut self, raw: &RawSample) -> FilteredSample {
        let [p, q, r, az, w1, w2, w3, w4] = self.step_channels(raw.channels());
        FilteredSample {
            timestamp: raw.timestamp,
            rates: [p, q, r],
            accel_z: az,
            rotor_speeds: [w1, w2, w3, w4],
            angular_accel: [0.0; 2],
        }
    }
}

/// Backward difference of the filtered roll and pitch rates. Pass `None` for
/// the first sample of a stream, which yields zero.
pub fn differentiate(previous: Option<&FilteredSample>, current: &FilteredSample) -> Result<[f64; 2]> {
    let Some(prev) = previous else {
        return Ok([0.0; 2]);
    };
    let dt = current.timestamp - prev.timestamp;
    if !(dt > 0.0) {
        return Err(Error::NonMonotoneTime {
            previous: prev.timestamp,
            current: current.timestamp,
        });
    }
    Ok([
        (current.rates[0] - prev.rates[0]) / dt,
        (current.rates[1] - prev.rates[1]) / dt,
    ])
}
