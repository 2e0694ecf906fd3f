//! Closed-form inverse of the allocation matrix.

use nalgebra::Matrix4;
use swarmstep_core::dynamics::QuadParams;

/// `G` built from the airframe constants.
pub fn allocation(p: &QuadParams) -> Matrix4<f64> {
    let ls = p.arm_length * p.arm_angle.sin();
    let lc = p.arm_length * p.arm_angle.cos();
    let k = p.k_torque / p.k_thrust;
    Matrix4::new(
        1.0, 1.0, 1.0, 1.0, //
        ls, -ls, -ls, ls, //
        -lc, -lc, lc, lc, //
        k, -k, k, -k,
    )
}

/// The rows of `G` are mutually orthogonal, so `G⁻¹ = Gᵀ · diag(1/‖rᵢ‖²)`.
pub fn inverse(p: &QuadParams) -> Matrix4<f64> {
    let g = allocation(p);
    let mut inv = g.transpose();
    for r in 0..4 {
        let n2 = g.row(r).norm_squared();
        for c in 0..4 {
            inv[(c, r)] /= n2;
        }
    }
    inv
}

/// `|det G| = 16 · L² sin α cos α · k_q/k_t`.
pub fn abs_det(p: &QuadParams) -> f64 {
    let l = p.arm_length;
    16.0 * l * p.arm_angle.sin() * l * p.arm_angle.cos() * (p.k_torque / p.k_thrust)
}
