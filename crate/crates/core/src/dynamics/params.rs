use serde::{Deserialize, Serialize};

use super::DynamicsError;
use crate::state::Vec3;

/// Physical constants shared by every agent of a quadrotor type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadParams {
    /// kg
    pub mass: f64,
    /// Principal moments (I_xx, I_yy, I_zz), kg·m².
    pub inertia: Vec3,
    /// Gravity magnitude, m/s². The gravity vector is `(0, 0, -gravity)`.
    pub gravity: f64,
    /// Rotor thrust coefficient, N/RPM².
    pub k_thrust: f64,
    /// Rotor drag torque coefficient, N·m/RPM².
    pub k_torque: f64,
    /// Arm length, m.
    pub arm_length: f64,
    /// Arm angle measured from the body x axis, rad.
    pub arm_angle: f64,
    /// Maximum motor speed, RPM.
    pub omega_max: f64,
}

impl Default for QuadParams {
    /// A 250-class quadrotor fixture used by tests and demos.
    fn default() -> Self {
        QuadParams {
            mass: 1.0,
            inertia: Vec3::new(0.01, 0.01, 0.02),
            gravity: 9.81,
            k_thrust: 1e-8,
            k_torque: 1e-10,
            arm_length: 0.2,
            arm_angle: std::f64::consts::FRAC_PI_4,
            omega_max: 40_000.0,
        }
    }
}

impl QuadParams {
    /// Thrust of one rotor at full speed, `k_t · Ω_max²`.
    pub fn f_motor_max(&self) -> f64 {
        self.k_thrust * self.omega_max * self.omega_max
    }

    /// Collective thrust that balances gravity.
    pub fn hover_thrust(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        let fields = [
            ("mass", self.mass),
            ("inertia.x", self.inertia.x),
            ("inertia.y", self.inertia.y),
            ("inertia.z", self.inertia.z),
            ("gravity", self.gravity),
            ("k_thrust", self.k_thrust),
            ("k_torque", self.k_torque),
            ("arm_length", self.arm_length),
            ("arm_angle", self.arm_angle),
            ("omega_max", self.omega_max),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(DynamicsError::InvalidParam { name, value: v });
            }
        }
        Ok(())
    }
}
