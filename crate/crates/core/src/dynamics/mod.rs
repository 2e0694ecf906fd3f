//! Quadrotor rigid-body dynamics over whole batches.

mod alloc;
mod params;
mod rk4;

pub use alloc::{
    allocation_matrix, mix_to_motors, rotor_thrust_torque, Mat4, MixOutput, Mixer, MotorThrusts,
    RotorOutput, WrenchCmd,
};
pub use params::QuadParams;
pub use rk4::{dynamics_deriv, rk4_step, Rk4Scratch, StateDerivative};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    InvalidParam { name: &'static str, value: f64 },
    #[error("allocation matrix is singular (det = {det:e})")]
    SingularAllocation { det: f64 },
}
