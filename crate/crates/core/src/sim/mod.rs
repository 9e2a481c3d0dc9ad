//! Rigid-body quadrotor simulator with commanded actuator effectiveness
//! faults, used to generate flight logs with known ground truth.
//!
//! Frames are body x forward, y right, z down and a world frame with z down.
//! Rotor thrust is `c_T k_i w_i^2` along body -z, rotor drag torque is
//! `c_M k_i w_i^2` about body z with rotors 1 and 3 spinning opposite to 2 and
//! 4. Rotor speeds follow their setpoints through a first-order lag and keep
//! spinning after a fault; only the effectiveness factor changes.

mod scenario;
mod sensors;

pub use scenario::{fly_scenario, Scenario, ScenarioConfig};
pub use sensors::{SensorModel, SensorNoiseModel};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::GRAVITY;
use crate::error::{Error, Result};
use crate::model::{gains_from_geometry, EffectivenessGains, ScalingFactors, VehicleGeometry};

/// Yaw reaction sign per rotor.
const SPIN: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    pub mass: f64,
    pub inertia_diag: [f64; 3],
    pub thrust_coeff: f64,
    pub moment_coeff: f64,
    /// h
    pub arm_x: f64,
    /// b
    pub arm_y: f64,
    pub motor_time_constant: f64,
    /// (min, max) rad/s
    pub rotor_speed_limits: (f64, f64),
}

impl Default for VehicleParams {
    /// A Bebop-2-sized vehicle whose lumped gains equal the detector defaults.
    fn default() -> Self {
        let gains = EffectivenessGains::default();
        let mass = 0.5;
        let inertia = [1.5e-3, 1.5e-3, 3.0e-3];
        let thrust_coeff = gains.g_az * mass;
        Self {
            mass,
            inertia_diag: inertia,
            thrust_coeff,
            moment_coeff: 0.016 * thrust_coeff,
            arm_x: gains.g_q * inertia[1] / thrust_coeff,
            arm_y: gains.g_p * inertia[0] / thrust_coeff,
            motor_time_constant: 0.03,
            rotor_speed_limits: (300.0, 1257.0),
        }
    }
}

impl VehicleParams {
    pub fn geometry(&self) -> VehicleGeometry {
        VehicleGeometry {
            arm_x: self.arm_x,
            arm_y: self.arm_y,
            thrust_coeff: self.thrust_coeff,
            moment_coeff: self.moment_coeff,
            inertia_diag: self.inertia_diag,
            mass: self.mass,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry().validate()?;
        let (lo, hi) = self.rotor_speed_limits;
        if !(self.motor_time_constant > 0.0) {
            return Err(Error::InvalidConfig("motor_time_constant must be > 0".into()));
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(Error::InvalidConfig(format!("rotor speed limits ({lo}, {hi}) must satisfy 0 < min < max")));
        }
        Ok(())
    }

    pub fn gains(&self) -> Result<EffectivenessGains> {
        gains_from_geometry(&self.geometry())
    }

    /// Rotor speed at which four nominal rotors carry the weight.
    pub fn hover_rotor_speed(&self) -> f64 {
        (self.mass * GRAVITY / (4.0 * self.thrust_coeff)).sqrt()
    }

    fn inertia(&self) -> Vector3<f64> {
        Vector3::from(self.inertia_diag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimState {
    /// Body angular rate (p, q, r).
    pub angular_rate: Vector3<f64>,
    /// Body-to-world rotation.
    pub attitude: UnitQuaternion<f64>,
    /// World frame.
    pub velocity: Vector3<f64>,
    pub position: Vector3<f64>,
    pub rotor_speeds: [f64; 4],
    /// Rotor shaft angles, drive the vibration model.
    pub rotor_angles: [f64; 4],
    pub true_k: ScalingFactors,
}

impl SimState {
    /// Level hover at trim rotor speed.
    pub fn hover(params: &VehicleParams) -> Self {
        let w = params.hover_rotor_speed();
        Self {
            angular_rate: Vector3::zeros(),
            attitude: UnitQuaternion::identity(),
            velocity: Vector3::zeros(),
            position: Vector3::new(0.0, 0.0, -10.0),
            rotor_speeds: [w; 4],
            rotor_angles: [0.0, 1.1, 2.3, 4.0],
            true_k: ScalingFactors::NOMINAL,
        }
    }

    fn is_sane(&self) -> bool {
        let finite = self.angular_rate.iter().all(|v| v.is_finite())
            && self.attitude.coords.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.position.iter().all(|v| v.is_finite())
            && self.rotor_speeds.iter().all(|v| v.is_finite());
        finite && self.angular_rate.norm() < 1e4 && self.velocity.norm() < 1e5 && self.position.norm() < 1e7
    }
}

/// External force and moment, both in body axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub force: Vector3<f64>,
    pub moment: Vector3<f64>,
}

impl Default for Disturbance {
    fn default() -> Self {
        Self {
            force: Vector3::zeros(),
            moment: Vector3::zeros(),
        }
    }
}

/// A commanded, instantaneous change of one actuator's effectiveness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub time: f64,
    /// One-based, 1..=4.
    pub actuator_index: usize,
    pub new_k: f64,
}

impl FaultEvent {
    /// Total loss (propeller gone) of `actuator_index` at `time`.
    pub fn ejection(actuator_index: usize, time: f64) -> Result<Self> {
        let e = Self {
            time,
            actuator_index,
            new_k: 0.0,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.actuator_index) {
            return Err(Error::InvalidArgument(format!(
                "actuator index {} outside 1..=4",
                self.actuator_index
            )));
        }
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(Error::InvalidArgument(format!("fault time must be >= 0, got {}", self.time)));
        }
        if !(0.0..=1.0).contains(&self.new_k) {
            return Err(Error::InvalidArgument(format!("fault new_k must lie in [0, 1], got {}", self.new_k)));
        }
        Ok(())
    }
}

pub fn inject_fault(state: &SimState, event: &FaultEvent) -> Result<SimState> {
    event.validate()?;
    let mut next = *state;
    next.true_k.0[event.actuator_index - 1] = event.new_k;
    Ok(next)
}

/// Per-rotor thrust (N).
pub fn rotor_thrusts(state: &SimState, params: &VehicleParams) -> [f64; 4] {
    let mut t = [0.0; 4];
    for i in 0..4 {
        t[i] = params.thrust_coeff * state.true_k.0[i] * state.rotor_speeds[i].powi(2);
    }
    t
}

/// Total actuator moment from thrust about the arms plus rotor drag torque.
pub fn actuator_moment(rotor_speeds: &[f64; 4], k: &ScalingFactors, params: &VehicleParams) -> Vector3<f64> {
    let positions = params.geometry().actuator_positions();
    let mut m = Vector3::zeros();
    for i in 0..4 {
        let w2 = k.0[i] * rotor_speeds[i] * rotor_speeds[i];
        let thrust = Vector3::new(0.0, 0.0, -params.thrust_coeff * w2);
        m += Vector3::from(positions[i]).cross(&thrust);
        m.z += SPIN[i] * params.moment_coeff * w2;
    }
    m
}

/// Specific force measured by an accelerometer at the centre of mass, body z.
pub fn proper_accel_z(state: &SimState, params: &VehicleParams, disturbance: &Disturbance) -> f64 {
    let thrust: f64 = rotor_thrusts(state, params).iter().sum();
    (-thrust + disturbance.force.z) / params.mass
}

#[derive(Clone, Copy)]
struct Derivative {
    angular_rate: Vector3<f64>,
    attitude: Quaternion<f64>,
    velocity: Vector3<f64>,
    position: Vector3<f64>,
    rotor_speeds: [f64; 4],
    rotor_angles: [f64; 4],
}

fn derivative(
    s: &SimState,
    q: &Quaternion<f64>,
    setpoints: &[f64; 4],
    params: &VehicleParams,
    dist: &Disturbance,
) -> Derivative {
    let inertia = params.inertia();
    let omega = s.angular_rate;
    let moment = actuator_moment(&s.rotor_speeds, &s.true_k, params) + dist.moment;
    let coupling = omega.cross(&inertia.component_mul(&omega));
    let angular_accel = (moment - coupling).component_div(&inertia);

    let q_dot = q * Quaternion::new(0.0, omega.x, omega.y, omega.z) * 0.5;

    let thrust: f64 = (0..4)
        .map(|i| params.thrust_coeff * s.true_k.0[i] * s.rotor_speeds[i].powi(2))
        .sum();
    let force_body = Vector3::new(0.0, 0.0, -thrust) + dist.force;
    let rot = UnitQuaternion::new_normalize(*q);
    let accel = rot * force_body / params.mass + Vector3::new(0.0, 0.0, GRAVITY);

    let (lo, hi) = params.rotor_speed_limits;
    let mut rotor_dot = [0.0; 4];
    for i in 0..4 {
        rotor_dot[i] = (setpoints[i].clamp(lo, hi) - s.rotor_speeds[i]) / params.motor_time_constant;
    }

    Derivative {
        angular_rate: angular_accel,
        attitude: q_dot,
        velocity: accel,
        position: s.velocity,
        rotor_speeds: rotor_dot,
        rotor_angles: s.rotor_speeds,
    }
}

fn advance(s: &SimState, q: &Quaternion<f64>, d: &Derivative, h: f64) -> (SimState, Quaternion<f64>) {
    let mut n = *s;
    n.angular_rate += d.angular_rate * h;
    n.velocity += d.velocity * h;
    n.position += d.position * h;
    for i in 0..4 {
        n.rotor_speeds[i] += d.rotor_speeds[i] * h;
        n.rotor_angles[i] += d.rotor_angles[i] * h;
    }
    (n, q + d.attitude * h)
}

/// One fixed RK4 step of rotor, rotational and translational dynamics.
/// Setpoints and disturbance are held constant over the step.
pub fn dynamics_step(
    state: &SimState,
    rotor_setpoints: &[f64; 4],
    params: &VehicleParams,
    disturbance: &Disturbance,
    dt: f64,
) -> SimState {
    let q0 = *state.attitude.quaternion();
    let k1 = derivative(state, &q0, rotor_setpoints, params, disturbance);
    let (s2, q2) = advance(state, &q0, &k1, dt / 2.0);
    let k2 = derivative(&s2, &q2, rotor_setpoints, params, disturbance);
    let (s3, q3) = advance(state, &q0, &k2, dt / 2.0);
    let k3 = derivative(&s3, &q3, rotor_setpoints, params, disturbance);
    let (s4, q4) = advance(state, &q0, &k3, dt);
    let k4 = derivative(&s4, &q4, rotor_setpoints, params, disturbance);

    let w = dt / 6.0;
    let mut next = *state;
    next.angular_rate +=
        (k1.angular_rate + k2.angular_rate * 2.0 + k3.angular_rate * 2.0 + k4.angular_rate) * w;
    next.velocity += (k1.velocity + k2.velocity * 2.0 + k3.velocity * 2.0 + k4.velocity) * w;
    next.position += (k1.position + k2.position * 2.0 + k3.position * 2.0 + k4.position) * w;
    let q = q0 + (k1.attitude + k2.attitude * 2.0 + k3.attitude * 2.0 + k4.attitude) * w;
    next.attitude = UnitQuaternion::new_normalize(q);

    let (lo, hi) = params.rotor_speed_limits;
    for i in 0..4 {
        let dw = k1.rotor_speeds[i] + 2.0 * k2.rotor_speeds[i] + 2.0 * k3.rotor_speeds[i] + k4.rotor_speeds[i];
        next.rotor_speeds[i] = (state.rotor_speeds[i] + dw * w).clamp(lo, hi);
        let da = k1.rotor_angles[i] + 2.0 * k2.rotor_angles[i] + 2.0 * k3.rotor_angles[i] + k4.rotor_angles[i];
        next.rotor_angles[i] = (state.rotor_angles[i] + da * w).rem_euclid(std::f64::consts::TAU);
    }
    next
}

pub(crate) fn check_sane(state: &SimState, step: usize, time: f64) -> Result<()> {
    if state.is_sane() {
        Ok(())
    } else {
        Err(Error::Diverged { step, time })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::predict_accelerations;

    #[test]
    fn default_vehicle_reproduces_detector_gains() {
        let p = VehicleParams::default();
        p.validate().unwrap();
        let g = p.gains().unwrap();
        let d = EffectivenessGains::default();
        assert!((g.g_p / d.g_p - 1.0).abs() < 0.01);
        assert!((g.g_q / d.g_q - 1.0).abs() < 0.01);
        assert!((g.g_az / d.g_az - 1.0).abs() < 0.01);
        assert!((p.arm_x - 0.06).abs() < 1e-12);
        assert!((p.thrust_coeff - 2.5e-6).abs() < 1e-18);
    }

    #[test]
    fn hover_trim_matches_model_gravity() {
        let p = VehicleParams::default();
        let w = p.hover_rotor_speed();
        let a = predict_accelerations(&p.gains().unwrap(), &[w; 4], &ScalingFactors::NOMINAL);
        assert!((a[2] + GRAVITY).abs() < 0.01 * GRAVITY);
        let s = SimState::hover(&p);
        assert!((proper_accel_z(&s, &p, &Disturbance::default()) + GRAVITY).abs() < 1e-9);
    }

    #[test]
    fn hover_is_an_equilibrium() {
        let p = VehicleParams::default();
        let s0 = SimState::hover(&p);
        let sp = s0.rotor_speeds;
        let mut s = s0;
        for _ in 0..100 {
            s = dynamics_step(&s, &sp, &p, &Disturbance::default(), 0.002);
        }
        assert!(s.angular_rate.norm() <= 1e-9);
        assert!(s.velocity.norm() <= 1e-9);
        assert!((s.position - s0.position).norm() <= 1e-9);
        assert!(s.attitude.angle_to(&s0.attitude) <= 1e-9);
        for i in 0..4 {
            assert!((s.rotor_speeds[i] - sp[i]).abs() <= 1e-9);
        }
    }

    #[test]
    fn losing_rotor_three_rolls_and_pitches_positive() {
        let p = VehicleParams::default();
        let s0 = SimState::hover(&p);
        let a0 = proper_accel_z(&s0, &p, &Disturbance::default());
        let s = inject_fault(&s0, &FaultEvent::ejection(3, 0.0).unwrap()).unwrap();
        assert_eq!(s.rotor_speeds, s0.rotor_speeds);
        assert_eq!(rotor_thrusts(&s, &p)[2], 0.0);
        let next = dynamics_step(&s, &s.rotor_speeds, &p, &Disturbance::default(), 0.002);
        assert!(next.angular_rate.x > 0.0);
        assert!(next.angular_rate.y > 0.0);
        // yaw reaction of rotor 3 is lost
        assert!(next.angular_rate.z < 0.0);
        assert!(proper_accel_z(&s, &p, &Disturbance::default()) > a0);
    }

    #[test]
    fn fault_bookkeeping() {
        let p = VehicleParams::default();
        let s0 = SimState::hover(&p);
        let healthy = inject_fault(&s0, &FaultEvent { time: 1.0, actuator_index: 2, new_k: 1.0 }).unwrap();
        assert_eq!(healthy, s0);
        let one = inject_fault(&s0, &FaultEvent::ejection(1, 1.0).unwrap()).unwrap();
        let two = inject_fault(&one, &FaultEvent::ejection(4, 1.5).unwrap()).unwrap();
        assert_eq!(two.true_k.0, [0.0, 1.0, 1.0, 0.0]);
        assert!(FaultEvent::ejection(5, 1.0).is_err());
        assert!(FaultEvent::ejection(0, 1.0).is_err());
        assert!(FaultEvent { time: 1.0, actuator_index: 1, new_k: 1.2 }.validate().is_err());
    }

    #[test]
    fn torque_free_angular_momentum_magnitude_conserved() {
        let p = VehicleParams::default();
        // rotors effectively stopped: no actuator moment, only the coupling term
        let params = VehicleParams {
            rotor_speed_limits: (1e-12, 1.0),
            ..p
        };
        let mut s = SimState::hover(&p);
        s.rotor_speeds = [1e-12; 4];
        s.angular_rate = Vector3::new(3.0, -2.0, 5.0);
        let inertia = p.inertia();
        let l0 = inertia.component_mul(&s.angular_rate).norm();
        let e0 = s.angular_rate.dot(&inertia.component_mul(&s.angular_rate));
        for _ in 0..1000 {
            s = dynamics_step(&s, &[1e-12; 4], &params, &Disturbance::default(), 0.002);
        }
        let l1 = inertia.component_mul(&s.angular_rate).norm();
        let e1 = s.angular_rate.dot(&inertia.component_mul(&s.angular_rate));
        assert!((l1 - l0).abs() / l0 <= 1e-6, "{l0} {l1}");
        assert!((e1 - e0).abs() / e0 <= 1e-6);
    }

    #[test]
    fn quaternion_stays_unit() {
        let p = VehicleParams::default();
        let mut s = SimState::hover(&p);
        s.angular_rate = Vector3::new(10.0, -7.0, 20.0);
        for _ in 0..1000 {
            s = dynamics_step(&s, &[900.0, 400.0, 800.0, 500.0], &p, &Disturbance::default(), 0.002);
            assert!((s.attitude.quaternion().norm() - 1.0).abs() < 1e-9);
        }
    }
}
