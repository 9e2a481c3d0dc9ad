//! Control effectiveness model: rotor speeds squared, scaled per actuator by
//! an effectiveness factor, map linearly to roll/pitch acceleration and body-z
//! specific force.
//!
//! Actuator layout (body frame, x forward, y right, z down):
//!
//! ```text
//!   r1 = ( h, -b, 0)   r2 = ( h,  b, 0)
//!   r4 = (-h, -b, 0)   r3 = (-h,  b, 0)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat34 = [[f64; 4]; 3];

/// Rows: roll, pitch, thrust. Columns: actuators 1..4.
pub const SIGN_MATRIX: [[f64; 4]; 3] = [
    [1.0, -1.0, -1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0],
    [-1.0, -1.0, -1.0, -1.0],
];

/// Lumped gains from squared rotor speed ((rad/s)^2) to p-dot, q-dot
/// (rad/s^2) and a_z (m/s^2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EffectivenessGains {
    pub g_p: f64,
    pub g_q: f64,
    pub g_az: f64,
}

impl Default for EffectivenessGains {
    fn default() -> Self {
        Self {
            g_p: 100e-6,
            g_q: 100e-6,
            g_az: 5e-6,
        }
    }
}

impl EffectivenessGains {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("g_p", self.g_p), ("g_q", self.g_q), ("g_az", self.g_az)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("gains.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    fn rows(&self) -> [f64; 3] {
        [self.g_p, self.g_q, self.g_az]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    /// h, m
    pub arm_x: f64,
    /// b, m
    pub arm_y: f64,
    /// c_T, N s^2
    pub thrust_coeff: f64,
    /// c_M, N m s^2 (yaw; not used by the estimator)
    pub moment_coeff: f64,
    /// (I_x, I_y, I_z), kg m^2
    pub inertia_diag: [f64; 3],
    /// kg
    pub mass: f64,
}

impl VehicleGeometry {
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("arm_x", self.arm_x),
            ("arm_y", self.arm_y),
            ("thrust_coeff", self.thrust_coeff),
            ("moment_coeff", self.moment_coeff),
            ("inertia_x", self.inertia_diag[0]),
            ("inertia_y", self.inertia_diag[1]),
            ("inertia_z", self.inertia_diag[2]),
            ("mass", self.mass),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("vehicle {name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Actuator position vectors r1..r4.
    pub fn actuator_positions(&self) -> [[f64; 3]; 4] {
        let (h, b) = (self.arm_x, self.arm_y);
        [[h, -b, 0.0], [h, b, 0.0], [-h, b, 0.0], [-h, -b, 0.0]]
    }
}

pub fn gains_from_geometry(geom: &VehicleGeometry) -> Result<EffectivenessGains> {
    geom.validate()?;
    Ok(EffectivenessGains {
        g_p: geom.thrust_coeff * geom.arm_y / geom.inertia_diag[0],
        g_q: geom.thrust_coeff * geom.arm_x / geom.inertia_diag[1],
        g_az: geom.thrust_coeff / geom.mass,
    })
}

/// Per-actuator effectiveness factors, nominally one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFactors(pub [f64; 4]);

impl ScalingFactors {
    pub const LOWER: f64 = 0.0;
    pub const UPPER: f64 = 1.5;
    pub const NOMINAL: Self = Self([1.0; 4]);

    pub fn clamped(self) -> Self {
        Self(clamp(self.0))
    }
}

impl Default for ScalingFactors {
    fn default() -> Self {
        Self::NOMINAL
    }
}

/// Componentwise clip to the admissible effectiveness range [0, 1.5].
pub fn clamp(x: [f64; 4]) -> [f64; 4] {
    x.map(|v| v.clamp(ScalingFactors::LOWER, ScalingFactors::UPPER))
}

/// `H[row][i] = sign[row][i] * gain[row] * w_i^2`
pub fn observation_matrix(gains: &EffectivenessGains, rotor_speeds: &[f64; 4]) -> Mat34 {
    observation_matrix_sq(gains, &rotor_speeds.map(|w| w * w))
}

/// Same as [`observation_matrix`] but from already squared rotor speeds.
pub fn observation_matrix_sq(gains: &EffectivenessGains, rotor_speeds_sq: &[f64; 4]) -> Mat34 {
    let g = gains.rows();
    let mut h = [[0.0; 4]; 3];
    for (row, (out, signs)) in h.iter_mut().zip(&SIGN_MATRIX).enumerate() {
        for i in 0..4 {
            out[i] = signs[i] * g[row] * rotor_speeds_sq[i];
        }
    }
    h
}

/// Predicted (p-dot, q-dot, a_z) with zero disturbance.
pub fn predict_accelerations(gains: &EffectivenessGains, rotor_speeds: &[f64; 4], k: &ScalingFactors) -> [f64; 3] {
    let h = observation_matrix(gains, rotor_speeds);
    h.map(|row| row.iter().zip(&k.0).map(|(a, b)| a * b).sum())
}
