use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{proper_accel_z, Disturbance, SimState, VehicleParams};
use crate::signal::RawSample;

/// IMU corruption. Rotor speeds are reported exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoiseModel {
    /// rad/s, white, per axis
    pub gyro_noise_std: f64,
    /// rad/s
    pub gyro_bias: [f64; 3],
    /// m/s^2
    pub accel_noise_std: f64,
    /// m/s^2
    pub accel_bias: f64,
    /// Rotor-harmonic amplitude on the gyro, rad/s.
    pub gyro_vibration: f64,
    /// Rotor-harmonic amplitude on the accelerometer, m/s^2.
    pub accel_vibration: f64,
    pub rng_seed: u64,
}

impl Default for SensorNoiseModel {
    fn default() -> Self {
        Self {
            gyro_noise_std: 0.005,
            gyro_bias: [0.01, -0.008, 0.004],
            accel_noise_std: 0.05,
            accel_bias: 0.1,
            gyro_vibration: 0.05,
            accel_vibration: 1.5,
            rng_seed: 0,
        }
    }
}

impl SensorNoiseModel {
    pub fn none() -> Self {
        Self {
            gyro_noise_std: 0.0,
            gyro_bias: [0.0; 3],
            accel_noise_std: 0.0,
            accel_bias: 0.0,
            gyro_vibration: 0.0,
            accel_vibration: 0.0,
            rng_seed: 0,
        }
    }
}

/// Stateful sensor synthesizer; owns the noise stream.
#[derive(Debug, Clone)]
pub struct SensorModel {
    noise: SensorNoiseModel,
    rng: ChaCha8Rng,
}

impl SensorModel {
    pub fn new(noise: SensorNoiseModel) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(noise.rng_seed),
            noise,
        }
    }

    fn gaussian(&mut self, std: f64) -> f64 {
        if std == 0.0 {
            return 0.0;
        }
        let n: f64 = StandardNormal.sample(&mut self.rng);
        std * n
    }

    pub fn synthesize(
        &mut self,
        state: &SimState,
        params: &VehicleParams,
        disturbance: &Disturbance,
        t: f64,
    ) -> RawSample {
        let accel_truth = proper_accel_z(state, params, disturbance);
        self.synthesize_from(state, accel_truth, t)
    }

    /// Like [`synthesize`](Self::synthesize) with the true specific force
    /// supplied by the caller (used for ground contact).
    pub fn synthesize_from(&mut self, state: &SimState, accel_truth: f64, t: f64) -> RawSample {
        let n = self.noise;
        let th = state.rotor_angles;
        let sum_sin = |phase: f64| th.iter().map(|a| (a + phase).sin()).sum::<f64>();
        let vib_gyro = [
            0.5 * n.gyro_vibration * sum_sin(0.0),
            0.5 * n.gyro_vibration * sum_sin(std::f64::consts::FRAC_PI_2),
            0.25 * n.gyro_vibration * sum_sin(0.5),
        ];
        let vib_accel = 0.5 * n.accel_vibration * sum_sin(1.0);

        let mut rate = [0.0; 3];
        for (axis, out) in rate.iter_mut().enumerate() {
            *out = state.angular_rate[axis] + n.gyro_bias[axis] + vib_gyro[axis] + self.gaussian(n.gyro_noise_std);
        }
        let accel_z = accel_truth + n.accel_bias + vib_accel + self.gaussian(n.accel_noise_std);

        RawSample {
            timestamp: t,
            angular_rate: rate,
            accel_z,
            rotor_speeds: state.rotor_speeds,
        }
    }
}
