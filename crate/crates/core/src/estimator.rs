//! Random-walk Kalman estimator for the four actuator effectiveness factors.
//!
//! State `x` holds k-hat, `P` its covariance. Per step:
//!
//! ```text
//! P- = P + Q
//! y  = z - H x
//! S  = R + H P- H'
//! K  = P- H' S^-1
//! x  = x + K y          (then clipped to [0, 1.5])
//! P  = (I - K H) P-     (then symmetrized)
//! ```
//!
//! Everything is fixed-size stack arithmetic; `S` is inverted through its
//! adjugate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{clamp, Mat34, ScalingFactors};

pub type Mat4 = [[f64; 4]; 4];
type Mat3 = [[f64; 3]; 3];

/// Scalar process and measurement noise, applied as `q I4` and `r I3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub process_noise_q: f64,
    pub measurement_noise_r: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            process_noise_q: 0.1,
            measurement_noise_r: 1.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("process_noise_q", self.process_noise_q),
            ("measurement_noise_r", self.measurement_noise_r),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("noise.{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Estimator inputs for one tick: `z = (p-dot, q-dot, a_z)` and the squared
/// rotor speeds that parameterize `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObservationFrame {
    pub z: [f64; 3],
    pub rotor_speeds_sq: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorState {
    pub x: [f64; 4],
    pub p: Mat4,
}

pub const DEFAULT_INITIAL_VARIANCE: f64 = 1.0;

impl Default for EstimatorState {
    fn default() -> Self {
        Self::init([1.0; 4], DEFAULT_INITIAL_VARIANCE).expect("nominal start is in range")
    }
}

impl EstimatorState {
    pub fn init(initial_k: [f64; 4], initial_variance: f64) -> Result<Self> {
        if initial_k
            .iter()
            .any(|k| !(ScalingFactors::LOWER..=ScalingFactors::UPPER).contains(k))
        {
            return Err(Error::InvalidArgument(format!(
                "initial effectiveness {initial_k:?} outside [0, 1.5]"
            )));
        }
        if !(initial_variance.is_finite() && initial_variance >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "initial variance must be >= 0, got {initial_variance}"
            )));
        }
        let mut p = [[0.0; 4]; 4];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = initial_variance;
        }
        Ok(Self { x: initial_k, p })
    }

    pub fn variances(&self) -> [f64; 4] {
        [self.p[0][0], self.p[1][1], self.p[2][2], self.p[3][3]]
    }

    pub fn k_hat(&self) -> ScalingFactors {
        ScalingFactors(self.x)
    }

    /// One estimator update followed by clipping the state to [0, 1.5].
    pub fn step(&self, h: &Mat34, z: &[f64; 3], noise: &NoiseConfig) -> Result<Self> {
        let mut next = self.step_unclamped(h, z, noise)?;
        next.x = clamp(next.x);
        Ok(next)
    }

    /// The bare update without clipping.
    pub fn step_unclamped(&self, h: &Mat34, z: &[f64; 3], noise: &NoiseConfig) -> Result<Self> {
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("observation"));
        }
        if !h.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("observation matrix"));
        }

        let mut prior = self.p;
        for (i, row) in prior.iter_mut().enumerate() {
            row[i] += noise.process_noise_q;
        }

        let mut innovation = *z;
        for (y, row) in innovation.iter_mut().zip(h) {
            *y -= dot4(row, &self.x);
        }

        // P- H'  (4x3)
        let mut pht = [[0.0; 3]; 4];
        for i in 0..4 {
            for j in 0..3 {
                pht[i][j] = dot4(&prior[i], &h[j]);
            }
        }

        let mut s: Mat3 = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                s[i][j] = (0..4).map(|m| h[i][m] * pht[m][j]).sum::<f64>();
            }
            s[i][i] += noise.measurement_noise_r;
        }
        let s_inv = invert3(&s)?;

        let mut gain = [[0.0; 3]; 4];
        for i in 0..4 {
            for j in 0..3 {
                gain[i][j] = (0..3).map(|m| pht[i][m] * s_inv[m][j]).sum::<f64>();
            }
        }

        let mut x = self.x;
        for (xi, g) in x.iter_mut().zip(&gain) {
            *xi += g.iter().zip(&innovation).map(|(a, b)| a * b).sum::<f64>();
        }

        // I - K H
        let mut ikh = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let kh: f64 = (0..3).map(|m| gain[i][m] * h[m][j]).sum();
                ikh[i][j] = if i == j { 1.0 - kh } else { -kh };
            }
        }
        let mut p = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                p[i][j] = (0..4).map(|m| ikh[i][m] * prior[m][j]).sum();
            }
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let avg = 0.5 * (p[i][j] + p[j][i]);
                p[i][j] = avg;
                p[j][i] = avg;
            }
        }

        if !x.iter().all(|v| v.is_finite()) || !p.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("estimator state"));
        }
        Ok(Self { x, p })
    }
}

#[inline]
fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

fn invert3(m: &Mat3) -> Result<Mat3> {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    // adjugate = transpose of the cofactor matrix
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = m[0][0] * adj[0][0] + m[0][1] * adj[1][0] + m[0][2] * adj[2][0];
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !det.is_finite() || det.abs() <= f64::EPSILON * scale.powi(3) {
        return Err(Error::SingularInnovation(det));
    }
    Ok(adj.map(|row| row.map(|v| v / det)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{observation_matrix, EffectivenessGains};

    #[test]
    fn init_examples() {
        let s = EstimatorState::init([1.0; 4], 0.1).unwrap();
        assert_eq!(s.x, [1.0; 4]);
        assert_eq!(s.variances(), [0.1; 4]);
        assert_eq!(s.p[0][1], 0.0);
        assert_eq!(EstimatorState::default().variances(), [1.0; 4]);
        assert!(EstimatorState::init([1.0, 1.6, 1.0, 1.0], 0.1).is_err());
        assert!(EstimatorState::init([1.0, -0.1, 1.0, 1.0], 0.1).is_err());
        assert!(EstimatorState::init([1.0; 4], -1.0).is_err());
    }

    #[test]
    fn zero_innovation_keeps_state() {
        let g = EffectivenessGains::default();
        let h = observation_matrix(&g, &[480.0, 520.0, 610.0, 450.0]);
        let s = EstimatorState::init([1.0; 4], 0.0).unwrap();
        let z = h.map(|row| row.iter().sum());
        let next = s.step(&h, &z, &NoiseConfig::default()).unwrap();
        assert_eq!(next.x, s.x);
        let trace = |p: &Mat4| (0..4).map(|i| p[i][i]).sum::<f64>();
        assert!(trace(&next.p) <= trace(&s.p) + 4.0 * 0.1 + 1e-12);
    }

    #[test]
    fn no_excitation_adds_process_noise() {
        let s = EstimatorState::init([0.9, 1.0, 0.3, 1.2], 0.5).unwrap();
        let next = s.step(&[[0.0; 4]; 3], &[0.4, -2.0, -9.8], &NoiseConfig::default()).unwrap();
        assert_eq!(next.x, s.x);
        assert_eq!(next.variances(), [0.6; 4]);
    }

    #[test]
    fn non_finite_inputs_are_errors() {
        let s = EstimatorState::default();
        let h = [[1.0; 4]; 3];
        assert!(s.step(&h, &[f64::NAN, 0.0, 0.0], &NoiseConfig::default()).is_err());
        let mut bad = h;
        bad[1][2] = f64::INFINITY;
        assert!(s.step(&bad, &[0.0; 3], &NoiseConfig::default()).is_err());
    }

    #[test]
    fn singular_innovation_detected() {
        let m = [[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [0.0, 1.0, 1.0]];
        assert!(matches!(invert3(&m), Err(Error::SingularInnovation(_))));
        let inv = invert3(&[[2.0, 0.0, 0.0], [0.0, 4.0, 0.0], [1.0, 0.0, 1.0]]).unwrap();
        assert_eq!(inv[0][0], 0.5);
        assert_eq!(inv[2][0], -0.5);
    }

    #[test]
    fn output_clamped() {
        let g = EffectivenessGains::default();
        let w = [700.0; 4];
        let h = observation_matrix(&g, &w);
        // observation implies much more thrust than nominal
        let z = [0.0, 0.0, -40.0];
        let next = EstimatorState::default().step(&h, &z, &NoiseConfig::default()).unwrap();
        assert!(next.x.iter().all(|&k| (0.0..=1.5).contains(&k)));
        assert!(next.x.contains(&1.5));
    }
}
