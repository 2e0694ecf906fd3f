//! Cascaded flight control: position loop, attitude error to body rates, and
//! the body-rate PID inner loop.

mod outer;
mod rate;

pub use outer::{outer_loop_row, position_outer_loop, OuterOutput, MIN_ACCEL};
pub use rate::{rate_pid_step, RatePidState};

use serde::{Deserialize, Serialize};

use crate::dynamics::QuadParams;
use crate::state::Vec3;

/// Body-rate and collective-thrust command for the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RateSetpoint {
    /// rad/s, body frame.
    pub omega_sp: Vec3,
    /// N
    pub f_c_sp: f64,
}

/// Position-level command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PosSetpoint {
    pub p_sp: Vec3,
    /// Feed-forward velocity, m/s.
    pub v_sp: Vec3,
    /// rad
    pub yaw_sp: f64,
}

impl PosSetpoint {
    pub fn hold(p: Vec3, yaw: f64) -> Self {
        PosSetpoint { p_sp: p, v_sp: Vec3::ZERO, yaw_sp: yaw }
    }

    pub fn is_finite(&self) -> bool {
        self.p_sp.is_finite() && self.v_sp.is_finite() && self.yaw_sp.is_finite()
    }
}

/// Per-axis PID gains of the body-rate loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidGains {
    pub kp: Vec3,
    pub ki: Vec3,
    pub kd: Vec3,
    /// Clamp on the integral state, rad.
    pub i_limit: Vec3,
}

impl Default for PidGains {
    fn default() -> Self {
        PidGains {
            kp: Vec3::splat(0.2),
            ki: Vec3::splat(0.01),
            kd: Vec3::splat(0.003),
            i_limit: Vec3::splat(0.5),
        }
    }
}

/// Gains of the position and attitude loops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OuterGains {
    pub kp_pos: Vec3,
    pub kv: Vec3,
    pub k_att: Vec3,
}

impl Default for OuterGains {
    fn default() -> Self {
        OuterGains { kp_pos: Vec3::splat(4.0), kv: Vec3::splat(4.0), k_att: Vec3::splat(10.0) }
    }
}

/// Saturation limits applied by the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlLimits {
    /// rad/s per body axis
    pub max_rate: Vec3,
    /// N
    pub min_thrust: f64,
    /// N
    pub max_thrust: f64,
    /// Largest angle between thrust axis and vertical, rad.
    pub max_tilt: f64,
}

impl ControlLimits {
    pub fn for_params(p: &QuadParams) -> Self {
        ControlLimits {
            max_rate: Vec3::new(6.0, 6.0, 3.0),
            min_thrust: 0.1 * p.hover_thrust(),
            max_thrust: 4.0 * p.f_motor_max(),
            max_tilt: 0.6,
        }
    }
}

/// Point on a horizontal circle about the origin at time `t`.
///
/// Yaw follows the direction of travel; for a stationary circle it points
/// along the tangent of positive rotation.
pub fn circle_reference(t: f64, radius: f64, omega: f64, z: f64, phase: f64) -> PosSetpoint {
    let a = omega * t + phase;
    let (s, c) = a.sin_cos();
    let yaw = if omega < 0.0 { a - std::f64::consts::FRAC_PI_2 } else { a + std::f64::consts::FRAC_PI_2 };
    PosSetpoint {
        p_sp: Vec3::new(radius * c, radius * s, z),
        v_sp: Vec3::new(-radius * omega * s, radius * omega * c, 0.0),
        yaw_sp: yaw,
    }
}
