//! Closed-loop scenario flights producing annotated flight logs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_sane, dynamics_step, inject_fault, Disturbance, FaultEvent, SensorModel, SensorNoiseModel, SimState, VehicleParams};
use crate::config::GRAVITY;
use crate::error::{Error, Result};
use crate::replay::{FlightLog, GroundTruth, LogHeader};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Attitude hold at a fixed (possibly tilted) setpoint.
    Hover,
    /// Random roll/pitch/yaw-rate setpoint steps.
    StepManeuvers,
    /// Hover in a steady wind with gusts.
    Wind,
    /// Sitting on the ground with rotors idling.
    GroundIdle,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Hover, Scenario::StepManeuvers, Scenario::Wind, Scenario::GroundIdle];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Hover => "hover",
            Scenario::StepManeuvers => "step-maneuvers",
            Scenario::Wind => "wind",
            Scenario::GroundIdle => "ground-idle",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown scenario `{s}` (hover, step-maneuvers, wind, ground-idle)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    /// s
    pub duration: f64,
    /// s
    pub sample_interval: f64,
    pub fault: Option<FaultEvent>,
    /// Drives maneuver schedules and gusts.
    pub seed: u64,
    /// Roll and pitch setpoint for hover-type scenarios, rad.
    pub attitude: [f64; 2],
    /// m/s, only used by [`Scenario::Wind`].
    pub wind_speed: f64,
}

impl ScenarioConfig {
    pub fn new(scenario: Scenario, duration: f64) -> Self {
        Self {
            scenario,
            duration,
            sample_interval: 0.002,
            fault: None,
            seed: 0,
            attitude: [0.0; 2],
            wind_speed: 10.0,
        }
    }

    pub fn with_fault(mut self, fault: FaultEvent) -> Self {
        self.fault = Some(fault);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy)]
struct Setpoint {
    roll: f64,
    pitch: f64,
    yaw_rate: f64,
}

/// Cascaded attitude/rate controller with altitude hold and a nominal mixer.
/// It has no knowledge of actuator faults.
#[derive(Debug, Clone)]
struct Controller {
    params: VehicleParams,
    altitude: f64,
}

impl Controller {
    const ATTITUDE_GAIN: f64 = 6.0;
    const RATE_GAIN: [f64; 3] = [25.0, 25.0, 8.0];
    const ALT_P: f64 = 4.0;
    const ALT_D: f64 = 4.0;

    fn rotor_setpoints(&self, s: &SimState, sp: Setpoint) -> [f64; 4] {
        let p = &self.params;
        let (roll, pitch, _) = s.attitude.euler_angles();
        let rate_sp = Vector3::new(
            Self::ATTITUDE_GAIN * (sp.roll - roll),
            Self::ATTITUDE_GAIN * (sp.pitch - pitch),
            sp.yaw_rate,
        );
        let mut torque = [0.0; 3];
        for axis in 0..3 {
            torque[axis] = p.inertia_diag[axis] * Self::RATE_GAIN[axis] * (rate_sp[axis] - s.angular_rate[axis]);
        }

        // world z is down
        let accel_sp = -Self::ALT_P * (s.position.z - self.altitude) - Self::ALT_D * s.velocity.z;
        let tilt = (roll.cos() * pitch.cos()).max(0.5);
        let thrust = (p.mass * (GRAVITY - accel_sp) / tilt).clamp(0.2 * p.mass * GRAVITY, 2.0 * p.mass * GRAVITY);

        let t = thrust / (4.0 * p.thrust_coeff);
        let l = torque[0] / (4.0 * p.thrust_coeff * p.arm_y);
        let m = torque[1] / (4.0 * p.thrust_coeff * p.arm_x);
        let n = torque[2] / (4.0 * p.moment_coeff);
        let squared = [t + l + m + n, t - l + m - n, t - l - m + n, t + l - m - n];
        let (lo, hi) = p.rotor_speed_limits;
        squared.map(|u| u.clamp(lo * lo, hi * hi).sqrt())
    }
}

/// Piecewise-constant setpoint schedule.
struct Schedule {
    segments: Vec<(f64, Setpoint)>,
}

impl Schedule {
    fn constant(sp: Setpoint) -> Self {
        Self { segments: vec![(0.0, sp)] }
    }

    fn maneuvers(rng: &mut ChaCha8Rng, duration: f64) -> Self {
        let mut segments = vec![(0.0, Setpoint { roll: 0.0, pitch: 0.0, yaw_rate: 0.0 })];
        let mut t = rng.gen_range(0.3..0.8);
        while t < duration {
            segments.push((
                t,
                Setpoint {
                    roll: rng.gen_range(-0.25..0.25),
                    pitch: rng.gen_range(-0.25..0.25),
                    yaw_rate: rng.gen_range(-1.0..1.0),
                },
            ));
            t += rng.gen_range(0.5..1.2);
        }
        Self { segments }
    }

    fn at(&self, t: f64) -> Setpoint {
        self.segments
            .iter()
            .rev()
            .find(|(start, _)| *start <= t)
            .map_or(self.segments[0].1, |(_, sp)| *sp)
    }
}

/// Steady wind load plus three sinusoidal gust components, scaled with the
/// square of wind speed.
struct Wind {
    force: Vector3<f64>,
    moment: Vector3<f64>,
    gusts: Vec<(f64, f64)>,
}

impl Wind {
    fn new(rng: &mut ChaCha8Rng, speed: f64) -> Self {
        let scale = (speed / 10.0).powi(2);
        let heading: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let gusts = (0..3)
            .map(|_| (rng.gen_range(0.3..3.0) * std::f64::consts::TAU, rng.gen_range(0.0..std::f64::consts::TAU)))
            .collect();
        Self {
            force: Vector3::new(0.8 * heading.cos(), 0.8 * heading.sin(), 0.1) * scale,
            moment: Vector3::new(2.0e-3 * heading.sin(), -1.5e-3 * heading.cos(), 5.0e-4) * scale,
            gusts,
        }
    }

    fn at(&self, t: f64) -> Disturbance {
        let g: f64 = self.gusts.iter().map(|(w, phi)| (w * t + phi).sin()).sum::<f64>() / 3.0;
        Disturbance {
            force: self.force * (1.0 + 0.5 * g),
            moment: self.moment * (1.0 + 0.5 * g),
        }
    }
}

/// Flies `config` and records the sensor stream at `config.sample_interval`.
pub fn fly_scenario(config: &ScenarioConfig, params: &VehicleParams, noise: &SensorNoiseModel) -> Result<FlightLog> {
    params.validate()?;
    if !(config.duration.is_finite() && config.duration > 0.0) {
        return Err(Error::InvalidArgument(format!("duration must be > 0, got {}", config.duration)));
    }
    let dt = config.sample_interval;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidArgument(format!("sample_interval must be > 0, got {dt}")));
    }
    if let Some(f) = &config.fault {
        f.validate()?;
    }

    let steps = (config.duration / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let level = Setpoint {
        roll: config.attitude[0],
        pitch: config.attitude[1],
        yaw_rate: 0.0,
    };
    let schedule = match config.scenario {
        Scenario::StepManeuvers => Schedule::maneuvers(&mut rng, config.duration),
        _ => Schedule::constant(level),
    };
    let wind = (config.scenario == Scenario::Wind).then(|| Wind::new(&mut rng, config.wind_speed));

    let mut state = SimState::hover(params);
    let controller = Controller {
        params: *params,
        altitude: state.position.z,
    };
    let mut sensors = SensorModel::new(*noise);
    let mut pending = config.fault;
    let mut samples = Vec::with_capacity(steps);

    for step in 0..steps {
        let t = step as f64 * dt;
        if let Some(fault) = pending.filter(|f| t >= f.time - 1e-9) {
            state = inject_fault(&state, &fault)?;
            pending = None;
        }

        if config.scenario == Scenario::GroundIdle {
            state.rotor_speeds = [params.rotor_speed_limits.0; 4];
            samples.push(sensors.synthesize_from(&state, -GRAVITY, t));
            for (angle, w) in state.rotor_angles.iter_mut().zip(state.rotor_speeds) {
                *angle = (*angle + w * dt).rem_euclid(std::f64::consts::TAU);
            }
            continue;
        }

        let disturbance = wind.as_ref().map_or_else(Disturbance::default, |w| w.at(t));
        samples.push(sensors.synthesize(&state, params, &disturbance, t));
        let setpoints = controller.rotor_setpoints(&state, schedule.at(t));
        state = dynamics_step(&state, &setpoints, params, &disturbance, dt);
        check_sane(&state, step, t)?;
    }

    let mut extra = BTreeMap::new();
    extra.insert("scenario".to_owned(), config.scenario.name().to_owned());
    extra.insert("seed".to_owned(), config.seed.to_string());
    let fault = config
        .fault
        .map(|f| GroundTruth::new(f.actuator_index, f.time))
        .transpose()?;
    Ok(FlightLog {
        header: LogHeader {
            sample_rate_hz: 1.0 / dt,
            vehicle_id: "sim-quad".to_owned(),
            fault,
            extra,
        },
        samples,
    })
}
