//! Tracking controllers: a nonholonomic follower for a single driving module
//! and a per axis PI follower for an assembled structure.

use thiserror::Error;

use crate::model::{wrap_to_2pi, wrap_to_pi, Pose2D, StructureTwist, WheelSpeeds};

/// Errors from controller gain validation.
#[derive(Debug, Error, PartialEq)]
pub enum ControlError {
    #[error("{name} must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Gains of the single module follower.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleGains {
    /// Longitudinal error to drive speed, 1/s.
    pub k1: f64,
    /// Lateral error to steering, 1/m (scaled by the reference speed).
    pub k2: f64,
    /// Heading error to steering, 1/m (scaled by the reference speed).
    pub k3: f64,
}

impl ModuleGains {
    pub fn new(k1: f64, k2: f64, k3: f64) -> Result<Self, ControlError> {
        for (name, value) in [("k1", k1), ("k2", k2), ("k3", k3)] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ControlError::NonPositive { name, value });
            }
        }
        Ok(Self { k1, k2, k3 })
    }
}

impl Default for ModuleGains {
    fn default() -> Self {
        Self {
            k1: 1.0,
            k2: 8.0,
            k3: 2.0,
        }
    }
}

/// Gains of the structure follower, one PI pair per world axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureGains {
    pub kp_x: f64,
    pub ki_x: f64,
    pub kp_y: f64,
    pub ki_y: f64,
    pub kp_theta: f64,
    pub ki_theta: f64,
    /// Anti windup clamp applied to each integral channel.
    pub integral_limit: f64,
}

impl StructureGains {
    pub fn validate(&self) -> Result<(), ControlError> {
        for (name, value) in [
            ("kp_x", self.kp_x),
            ("ki_x", self.ki_x),
            ("kp_y", self.kp_y),
            ("ki_y", self.ki_y),
            ("kp_theta", self.kp_theta),
            ("ki_theta", self.ki_theta),
            ("integral_limit", self.integral_limit),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ControlError::NonPositive { name, value });
            }
        }
        Ok(())
    }
}

impl Default for StructureGains {
    fn default() -> Self {
        Self {
            kp_x: 1.5,
            ki_x: 0.1,
            kp_y: 1.5,
            ki_y: 0.1,
            kp_theta: 2.0,
            ki_theta: 0.1,
            integral_limit: 0.5,
        }
    }
}

/// World frame pose error; the heading component lives in `(-pi, pi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    pub ex: f64,
    pub ey: f64,
    pub etheta: f64,
}

impl TrackingError {
    pub fn position_norm(&self) -> f64 {
        self.ex.hypot(self.ey)
    }
}

/// Reference minus actual pose, world frame, heading wrapped.
pub fn tracking_error(pose: &Pose2D, reference: &Pose2D) -> TrackingError {
    TrackingError {
        ex: reference.x - pose.x,
        ey: reference.y - pose.y,
        etheta: wrap_to_pi(reference.theta - pose.theta),
    }
}

/// Accumulated, clamped error integrals of the structure follower.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IntegratorState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl IntegratorState {
    pub fn zero() -> Self {
        Self::default()
    }
}

/// One control decision for a single driving module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModuleCommand {
    /// Desired drive speed along the wheel heading, m/s.
    pub drive_velocity: f64,
    /// Desired steering rate, rad/s.
    pub heading_rate: f64,
    /// Steering target one step ahead, rad, in `[0, 2*pi)`.
    pub heading_target: f64,
}

/// Follower step for one free module tracking a moving reference pose.
///
/// Errors are taken in the module body frame: longitudinal error speeds the
/// wheel up, lateral and heading errors steer. The steering target integrates
/// the commanded rate over one step, matching a steering servo that is told
/// where to be rather than how fast to turn.
pub fn module_control_step(
    pose: &Pose2D,
    reference: &Pose2D,
    v_ref: f64,
    omega_ref: f64,
    gains: &ModuleGains,
    dt: f64,
) -> ModuleCommand {
    let dx = reference.x - pose.x;
    let dy = reference.y - pose.y;
    let (s, c) = pose.theta.sin_cos();
    let e_long = c * dx + s * dy;
    let e_lat = -s * dx + c * dy;
    let e_heading = wrap_to_pi(reference.theta - pose.theta);

    let drive_velocity = v_ref * e_heading.cos() + gains.k1 * e_long;
    let heading_rate = omega_ref + gains.k2 * v_ref * e_lat + gains.k3 * v_ref * e_heading.sin();
    ModuleCommand {
        drive_velocity,
        heading_rate,
        heading_target: wrap_to_2pi(pose.theta + heading_rate * dt),
    }
}

/// PI follower step for the assembled structure.
///
/// Produces a world frame twist: feedforward plus proportional and integral
/// corrections per axis. The integrator is charged after the output is formed
/// and clamped to the anti windup limit.
pub fn structure_control_step(
    pose: &Pose2D,
    reference: &Pose2D,
    feedforward: &StructureTwist,
    gains: &StructureGains,
    integrator: &mut IntegratorState,
    dt: f64,
) -> StructureTwist {
    let e = tracking_error(pose, reference);
    let twist = StructureTwist::new(
        feedforward.vx + gains.kp_x * e.ex + gains.ki_x * integrator.x,
        feedforward.vy + gains.kp_y * e.ey + gains.ki_y * integrator.y,
        feedforward.omega + gains.kp_theta * e.etheta + gains.ki_theta * integrator.theta,
    );
    let limit = gains.integral_limit;
    integrator.x = (integrator.x + e.ex * dt).clamp(-limit, limit);
    integrator.y = (integrator.y + e.ey * dt).clamp(-limit, limit);
    integrator.theta = (integrator.theta + e.etheta * dt).clamp(-limit, limit);
    twist
}

/// Scales all wheel speeds by one common factor so none exceeds `max_speed`.
///
/// Uniform scaling keeps the twist direction; the structure slows down instead
/// of veering when a wheel hits its limit.
pub fn saturate_wheels(wheels: &WheelSpeeds, max_speed: f64) -> WheelSpeeds {
    debug_assert!(max_speed > 0.0, "wheel speed limit must be positive");
    let peak = wheels.max_abs();
    if peak <= max_speed {
        return wheels.clone();
    }
    let scale = max_speed / peak;
    WheelSpeeds::new(wheels.omegas.iter().map(|w| w * scale).collect())
}
