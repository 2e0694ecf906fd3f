//! Rotor model and control allocation.

use super::{DynamicsError, QuadParams};
use crate::state::Vec3;

/// Row-major 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[f64; 4]; 4]);

impl Mat4 {
    pub const IDENTITY: Mat4 = Mat4([
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0, 1.0],
    ]);

    #[inline]
    pub fn mul_vec(&self, v: [f64; 4]) -> [f64; 4] {
        let m = &self.0;
        let mut out = [0.0; 4];
        for (o, row) in out.iter_mut().zip(m.iter()) {
            *o = row[0] * v[0] + row[1] * v[1] + row[2] * v[2] + row[3] * v[3];
        }
        out
    }

    pub fn mul(&self, o: &Mat4) -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for (r, out_row) in out.iter_mut().enumerate() {
            for (c, cell) in out_row.iter_mut().enumerate() {
                *cell = (0..4).map(|k| self.0[r][k] * o.0[k][c]).sum();
            }
        }
        Mat4(out)
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting, plus the
    /// determinant accumulated from the pivots.
    pub fn inverse_and_det(&self) -> (Option<Mat4>, f64) {
        let mut a = self.0;
        let mut inv = Mat4::IDENTITY.0;
        let mut det = 1.0;
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap_or(col);
            if a[pivot][col] == 0.0 {
                return (None, 0.0);
            }
            if pivot != col {
                a.swap(pivot, col);
                inv.swap(pivot, col);
                det = -det;
            }
            let p = a[col][col];
            det *= p;
            for k in 0..4 {
                a[col][k] /= p;
                inv[col][k] /= p;
            }
            for row in 0..4 {
                if row != col {
                    let f = a[row][col];
                    if f != 0.0 {
                        for k in 0..4 {
                            a[row][k] -= f * a[col][k];
                            inv[row][k] -= f * inv[col][k];
                        }
                    }
                }
            }
        }
        (Some(Mat4(inv)), det)
    }

    pub fn max_abs_diff(&self, o: &Mat4) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..4 {
            for c in 0..4 {
                m = m.max((self.0[r][c] - o.0[r][c]).abs());
            }
        }
        m
    }
}

/// Thrust and drag torque of one rotor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorOutput {
    pub thrust: f64,
    pub torque: f64,
    /// The requested speed was outside `[0, omega_max]` and was clamped.
    pub saturated: bool,
}

/// Quadratic rotor model `f = k_t·Ω²`, `τ = k_q·Ω²` with Ω in RPM.
pub fn rotor_thrust_torque(params: &QuadParams, omega_rpm: f64) -> RotorOutput {
    let clamped = if omega_rpm.is_nan() { 0.0 } else { omega_rpm.clamp(0.0, params.omega_max) };
    let saturated = clamped != omega_rpm;
    let w2 = clamped * clamped;
    RotorOutput { thrust: params.k_thrust * w2, torque: params.k_torque * w2, saturated }
}

/// Collective thrust and body torque `[f_c, τ_x, τ_y, τ_z]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WrenchCmd {
    /// N
    pub f_c: f64,
    /// N·m, body frame.
    pub tau: Vec3,
}

impl WrenchCmd {
    pub const ZERO: WrenchCmd = WrenchCmd { f_c: 0.0, tau: Vec3::ZERO };

    pub fn new(f_c: f64, tau: Vec3) -> Self {
        WrenchCmd { f_c, tau }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.f_c, self.tau.x, self.tau.y, self.tau.z]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        WrenchCmd { f_c: a[0], tau: Vec3::new(a[1], a[2], a[3]) }
    }

    pub fn is_finite(&self) -> bool {
        self.f_c.is_finite() && self.tau.is_finite()
    }
}

/// Per-rotor thrusts `f_1..f_4`, N.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorThrusts(pub [f64; 4]);

/// The allocation matrix `G` mapping rotor thrusts to the body wrench.
///
/// Rows: collective thrust, roll torque, pitch torque, yaw torque. The
/// row sign patterns follow the rotor numbering of the airframe model.
pub fn allocation_matrix(params: &QuadParams) -> Result<Mat4, DynamicsError> {
    let ls = params.arm_length * params.arm_angle.sin();
    let lc = params.arm_length * params.arm_angle.cos();
    let kr = params.k_torque / params.k_thrust;
    let g = Mat4([
        [1.0, 1.0, 1.0, 1.0],
        [ls, -ls, -ls, ls],
        [-lc, -lc, lc, lc],
        [kr, -kr, kr, -kr],
    ]);
    let (_, det) = g.inverse_and_det();
    if det.is_nan() || det.abs() <= 1e-12 {
        return Err(DynamicsError::SingularAllocation { det });
    }
    params.validate()?;
    Ok(g)
}

/// Result of mixing a wrench command into rotor thrusts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixOutput {
    pub motors: MotorThrusts,
    /// `G · motors`, the wrench the rotors actually produce after clamping.
    pub realized: WrenchCmd,
    pub saturated: bool,
}

/// Inverse allocation with per-rotor saturation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixer {
    g: Mat4,
    g_inv: Mat4,
    f_motor_max: f64,
}

impl Mixer {
    pub fn new(params: &QuadParams) -> Result<Self, DynamicsError> {
        let g = allocation_matrix(params)?;
        let (inv, det) = g.inverse_and_det();
        let g_inv = inv.ok_or(DynamicsError::SingularAllocation { det })?;
        Ok(Mixer { g, g_inv, f_motor_max: params.f_motor_max() })
    }

    pub fn allocation(&self) -> &Mat4 {
        &self.g
    }

    pub fn inverse(&self) -> &Mat4 {
        &self.g_inv
    }

    pub fn f_motor_max(&self) -> f64 {
        self.f_motor_max
    }

    /// `G · f`.
    #[inline]
    pub fn forward(&self, motors: MotorThrusts) -> WrenchCmd {
        WrenchCmd::from_array(self.g.mul_vec(motors.0))
    }

    /// `G⁻¹ · w` with every rotor clamped to `[0, f_motor_max]`.
    #[inline]
    pub fn mix(&self, cmd: WrenchCmd) -> MixOutput {
        let raw = self.g_inv.mul_vec(cmd.to_array());
        let mut f = [0.0; 4];
        let mut saturated = false;
        for (dst, src) in f.iter_mut().zip(raw) {
            let c = if src.is_nan() { 0.0 } else { src.clamp(0.0, self.f_motor_max) };
            saturated |= c != src;
            *dst = c;
        }
        let motors = MotorThrusts(f);
        MixOutput { motors, realized: self.forward(motors), saturated }
    }
}

/// Mixes `cmd` for the given parameters. Convenience over [`Mixer::mix`].
pub fn mix_to_motors(cmd: WrenchCmd, params: &QuadParams) -> Result<MixOutput, DynamicsError> {
    Ok(Mixer::new(params)?.mix(cmd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn ex_params() -> QuadParams {
        // L = 0.2, α = π/4, k_q/k_t = 0.01
        QuadParams { arm_length: 0.2, arm_angle: FRAC_PI_4, ..Default::default() }
    }

    #[test]
    fn rotor_examples() {
        let p = QuadParams::default();
        assert_eq!(rotor_thrust_torque(&p, 0.0), RotorOutput { thrust: 0.0, torque: 0.0, saturated: false });
        let r = rotor_thrust_torque(&p, 10_000.0);
        assert!((r.thrust - 1.0).abs() < 1e-12);
        assert!((r.torque - 0.01).abs() < 1e-14);
        let r = rotor_thrust_torque(&p, p.omega_max);
        assert_eq!(r.thrust, p.f_motor_max());
        assert!(!r.saturated);
    }

    #[test]
    fn rotor_speed_is_clamped() {
        let p = QuadParams::default();
        let r = rotor_thrust_torque(&p, 50_000.0);
        assert!(r.saturated);
        assert_eq!(r.thrust, p.f_motor_max());
        let r = rotor_thrust_torque(&p, -5.0);
        assert!(r.saturated);
        assert_eq!(r.thrust, 0.0);
    }

    #[test]
    fn equal_thrusts_give_pure_collective() {
        let g = allocation_matrix(&ex_params()).unwrap();
        let w = g.mul_vec([1.0; 4]);
        assert_eq!(w[0], 4.0);
        for v in &w[1..] {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn first_column_readoff() {
        let g = allocation_matrix(&ex_params()).unwrap();
        let w = g.mul_vec([1.0, 0.0, 0.0, 0.0]);
        let s = 0.2 * FRAC_PI_4.sin();
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.141_421_356_237_309_5).abs() < 1e-15 && (w[1] - s).abs() < 1e-16);
        assert!((w[2] + 0.141_421_356_237_309_5).abs() < 1e-15);
        assert!((w[3] - 0.01).abs() < 1e-16);
    }

    #[test]
    fn degenerate_arm_angle_is_singular() {
        let p = QuadParams { arm_angle: 0.0, ..Default::default() };
        assert!(matches!(allocation_matrix(&p), Err(DynamicsError::SingularAllocation { .. })));
        let p = QuadParams { arm_angle: 1e-300, ..Default::default() };
        assert!(matches!(allocation_matrix(&p), Err(DynamicsError::SingularAllocation { .. })));
    }

    #[test]
    fn hover_mix_is_symmetric() {
        let out = mix_to_motors(WrenchCmd::new(9.81, Vec3::ZERO), &QuadParams::default()).unwrap();
        for f in out.motors.0 {
            assert!((f - 2.4525).abs() < 1e-12);
        }
        assert!(!out.saturated);
        let out = mix_to_motors(WrenchCmd::new(4.0 * 1.5, Vec3::ZERO), &QuadParams::default()).unwrap();
        for f in out.motors.0 {
            assert!((f - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_rotor_demand_is_clamped_and_reported() {
        let p = QuadParams::default();
        let mixer = Mixer::new(&p).unwrap();
        let cmd = WrenchCmd::new(2.0, Vec3::new(-1.0, 0.0, 0.0));
        let raw = mixer.inverse().mul_vec(cmd.to_array());
        assert!(raw[0] < 0.0, "test setup must demand a negative f_1");
        let out = mixer.mix(cmd);
        assert!(out.saturated);
        assert_eq!(out.motors.0[0], 0.0);
        assert_ne!(out.realized, cmd);
        let fwd = mixer.forward(out.motors);
        assert_eq!(fwd, out.realized);
    }

    #[test]
    fn inverse_of_singular_matrix() {
        let m = Mat4([[1.0, 2.0, 3.0, 4.0], [2.0, 4.0, 6.0, 8.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]);
        let (inv, det) = m.inverse_and_det();
        assert!(inv.is_none() || det.abs() < 1e-12);
    }
}
