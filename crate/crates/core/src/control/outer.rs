use super::{ControlLimits, OuterGains, PosSetpoint, RateSetpoint};
use crate::exec::{for_each_chunk, Parallelism};
use crate::state::{AgentBatch, UnitQuat, Vec3};

/// Below this acceleration magnitude (m/s²) the thrust direction is undefined.
pub const MIN_ACCEL: f64 = 1e-6;

/// Output of one outer-loop evaluation for one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OuterOutput {
    pub setpoint: RateSetpoint,
    /// The commanded acceleration was (near) zero and the thrust floor was used.
    pub thrust_floor: bool,
}

/// Position → attitude → body-rate cascade for a single agent.
#[allow(clippy::too_many_arguments)]
#[inline]
pub fn outer_loop_row(
    pos: Vec3,
    vel: Vec3,
    quat: UnitQuat,
    sp: &PosSetpoint,
    mass: f64,
    gravity: f64,
    gains: &OuterGains,
    limits: &ControlLimits,
) -> OuterOutput {
    let mut acc = gains.kp_pos.mul_elem(sp.p_sp - pos) + gains.kv.mul_elem(sp.v_sp - vel);
    acc.z += gravity;

    // keep the thrust direction within the tilt limit
    if acc.z > 0.0 {
        let horiz = (acc.x * acc.x + acc.y * acc.y).sqrt();
        let max_h = acc.z * limits.max_tilt.tan();
        if horiz > max_h {
            let s = max_h / horiz;
            acc.x *= s;
            acc.y *= s;
        }
    }

    let z_body = quat.rotate(Vec3::Z);
    let a_norm = acc.norm();
    let (z_des, f_c, floor) = if a_norm < MIN_ACCEL {
        (z_body, limits.min_thrust, true)
    } else {
        let z_des = acc / a_norm;
        let f = mass * a_norm * z_body.dot(z_des);
        (z_des, f.clamp(limits.min_thrust, limits.max_thrust), false)
    };

    let heading = Vec3::new(sp.yaw_sp.cos(), sp.yaw_sp.sin(), 0.0);
    let mut y_des = z_des.cross(heading);
    let y_n = y_des.norm();
    if y_n < 1e-6 {
        // thrust axis along the heading: keep the current body y axis
        y_des = quat.rotate(Vec3::Y);
        y_des = (y_des - z_des * y_des.dot(z_des)) / (y_des - z_des * y_des.dot(z_des)).norm();
    } else {
        y_des = y_des / y_n;
    }
    let x_des = y_des.cross(z_des);
    let r_des = [
        [x_des.x, y_des.x, z_des.x],
        [x_des.y, y_des.y, z_des.y],
        [x_des.z, y_des.z, z_des.z],
    ];
    let q_des = UnitQuat::from_rotation_matrix(r_des);
    let err = (quat.conj() * q_des).to_rotation_vector();
    let omega_sp = gains.k_att.mul_elem(err).clamp_abs(limits.max_rate);

    OuterOutput { setpoint: RateSetpoint { omega_sp, f_c_sp: f_c }, thrust_floor: floor }
}

/// Batched outer loop. Dead rows are left untouched in `out`.
///
/// Returns the number of live agents that hit the thrust floor.
#[allow(clippy::too_many_arguments)]
pub fn position_outer_loop(
    batch: &AgentBatch,
    setpoints: &[PosSetpoint],
    mass: f64,
    gravity: f64,
    gains: &OuterGains,
    limits: &ControlLimits,
    out: &mut [RateSetpoint],
    par: Parallelism,
) -> usize {
    let mut floor = vec![false; batch.len()];
    let quats: &[UnitQuat] = batch.quat();
    let (g, l) = (*gains, *limits);
    for_each_chunk(
        par,
        ((batch.alive(), batch.pos(), batch.vel(), quats, setpoints), out, &mut floor[..]),
        &|((alive, pos, vel, quat, sp), out, floor), _| {
            for i in 0..alive.len() {
                if !alive[i] {
                    continue;
                }
                let o = outer_loop_row(pos[i], vel[i], quat[i], &sp[i], mass, gravity, &g, &l);
                out[i] = o.setpoint;
                floor[i] = o.thrust_floor;
            }
        },
    );
    floor.iter().filter(|f| **f).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::QuadParams;
    use std::f64::consts::FRAC_PI_2;

    fn hover_sp(p: Vec3) -> PosSetpoint {
        PosSetpoint { p_sp: p, v_sp: Vec3::ZERO, yaw_sp: 0.0 }
    }

    #[test]
    fn equilibrium_gives_hover_thrust_and_zero_rate() {
        let qp = QuadParams::default();
        let p = Vec3::new(1.0, 2.0, 3.0);
        let o = outer_loop_row(p, Vec3::ZERO, UnitQuat::IDENTITY, &hover_sp(p), qp.mass, qp.gravity, &OuterGains::default(), &ControlLimits::for_params(&qp));
        assert_eq!(o.setpoint.f_c_sp, qp.mass * qp.gravity);
        assert_eq!(o.setpoint.omega_sp, Vec3::ZERO);
        assert!(!o.thrust_floor);
    }

    #[test]
    fn vertical_error_raises_thrust() {
        let qp = QuadParams::default();
        let gains = OuterGains { kp_pos: Vec3::splat(1.0), kv: Vec3::ZERO, ..OuterGains::default() };
        let o = outer_loop_row(Vec3::ZERO, Vec3::ZERO, UnitQuat::IDENTITY, &hover_sp(Vec3::new(0.0, 0.0, 1.0)), qp.mass, qp.gravity, &gains, &ControlLimits::for_params(&qp));
        assert!((o.setpoint.f_c_sp - 10.81).abs() < 1e-12);
        assert_eq!(o.setpoint.omega_sp, Vec3::ZERO);
    }

    #[test]
    fn pure_yaw_error_commands_positive_yaw_rate_only() {
        let qp = QuadParams::default();
        let sp = PosSetpoint { yaw_sp: FRAC_PI_2, ..hover_sp(Vec3::ZERO) };
        let o = outer_loop_row(Vec3::ZERO, Vec3::ZERO, UnitQuat::IDENTITY, &sp, qp.mass, qp.gravity, &OuterGains::default(), &ControlLimits::for_params(&qp));
        let w = o.setpoint.omega_sp;
        assert!(w.z > 0.0);
        assert!(w.x.abs() < 1e-12 && w.y.abs() < 1e-12, "{w:?}");
    }

    #[test]
    fn free_fall_command_uses_thrust_floor() {
        let qp = QuadParams::default();
        let gains = OuterGains { kp_pos: Vec3::splat(1.0), kv: Vec3::ZERO, ..OuterGains::default() };
        let limits = ControlLimits::for_params(&qp);
        // position error of exactly -g along z cancels gravity
        let sp = hover_sp(Vec3::new(0.0, 0.0, -qp.gravity));
        let o = outer_loop_row(Vec3::ZERO, Vec3::ZERO, UnitQuat::IDENTITY, &sp, qp.mass, qp.gravity, &gains, &limits);
        assert!(o.thrust_floor);
        assert_eq!(o.setpoint.f_c_sp, limits.min_thrust);
    }

    #[test]
    fn lateral_error_tilts_toward_target() {
        let qp = QuadParams::default();
        let o = outer_loop_row(Vec3::ZERO, Vec3::ZERO, UnitQuat::IDENTITY, &hover_sp(Vec3::new(1.0, 0.0, 0.0)), qp.mass, qp.gravity, &OuterGains::default(), &ControlLimits::for_params(&qp));
        // moving toward +x needs a positive pitch rate in FLU
        assert!(o.setpoint.omega_sp.y > 0.0);
        assert!(o.setpoint.omega_sp.x.abs() < 1e-12);
    }
}
