use serde::{Deserialize, Serialize};

use super::SimError;
use crate::exec::{for_each_chunk, Parallelism};
use crate::state::{AgentBatch, UnitQuat, Vec3};

/// Below this turn rate (rad/s) the straight-line update is used.
const ARC_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnicycleParams {
    /// m/s
    pub v_max: f64,
    /// rad/s
    pub omega_max: f64,
}

impl Default for UnicycleParams {
    fn default() -> Self {
        UnicycleParams { v_max: 2.0, omega_max: 2.0 }
    }
}

impl UnicycleParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.v_max.is_finite() && self.v_max > 0.0 && self.omega_max.is_finite() && self.omega_max > 0.0) {
            return Err(SimError::Config(format!(
                "unicycle limits must be positive, got v_max={} omega_max={}",
                self.v_max, self.omega_max
            )));
        }
        Ok(())
    }
}

/// Forward speed and turn rate command.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnicycleCmd {
    pub v: f64,
    pub omega: f64,
}

/// Planar kinematic step, integrated exactly along the arc.
///
/// Heading is stored as a yaw-only attitude; `vel` and `omega` columns hold
/// the applied speed and turn rate. Altitude is left unchanged.
pub fn unicycle_step(
    batch: &mut AgentBatch,
    cmds: &[UnicycleCmd],
    params: &UnicycleParams,
    dt: f64,
    par: Parallelism,
) {
    assert_eq!(cmds.len(), batch.len(), "command column length");
    let p = *params;
    for_each_chunk(
        par,
        (
            &batch.alive[..],
            cmds,
            (&mut batch.pos[..], &mut batch.vel[..], &mut batch.quat[..], &mut batch.omega[..]),
        ),
        &|(alive, cmds, (pos, vel, quat, omega)), _| {
            for i in 0..alive.len() {
                if !alive[i] {
                    continue;
                }
                let v = cmds[i].v.clamp(-p.v_max, p.v_max);
                let w = cmds[i].omega.clamp(-p.omega_max, p.omega_max);
                let th0 = quat[i].yaw();
                let th1 = th0 + w * dt;
                let (s0, c0) = th0.sin_cos();
                let (s1, c1) = th1.sin_cos();
                let (dx, dy) = if w.abs() > ARC_EPS {
                    let r = v / w;
                    (r * (s1 - s0), r * (c0 - c1))
                } else {
                    (v * c0 * dt, v * s0 * dt)
                };
                pos[i].x += dx;
                pos[i].y += dy;
                quat[i] = UnitQuat::from_yaw(th1);
                vel[i] = Vec3::new(v * c1, v * s1, 0.0);
                omega[i] = Vec3::new(0.0, 0.0, w);
            }
        },
    );
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{AgentTypeId, InitialPose};
    use std::f64::consts::PI;

    fn one() -> AgentBatch {
        AgentBatch::create(AgentTypeId(1), &[InitialPose::at(Vec3::ZERO)], 0).unwrap()
    }

    fn params() -> UnicycleParams {
        UnicycleParams { v_max: 5.0, omega_max: 5.0 }
    }

    #[test]
    fn straight_line() {
        let mut b = one();
        unicycle_step(&mut b, &[UnicycleCmd { v: 1.0, omega: 0.0 }], &params(), 1.0, Parallelism::Sequential);
        assert_eq!(b.pos()[0], Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn pivot_in_place() {
        let mut b = one();
        unicycle_step(&mut b, &[UnicycleCmd { v: 0.0, omega: PI }], &params(), 1.0, Parallelism::Sequential);
        assert_eq!(b.pos()[0], Vec3::ZERO);
        assert!((b.quat()[0].yaw().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn half_circle_arc() {
        let mut b = one();
        unicycle_step(&mut b, &[UnicycleCmd { v: 1.0, omega: 1.0 }], &params(), PI, Parallelism::Sequential);
        assert!((b.pos()[0] - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-12, "{:?}", b.pos()[0]);
    }

    #[test]
    fn arc_matches_many_small_steps() {
        let mut exact = one();
        let mut fine = one();
        let cmd = [UnicycleCmd { v: 1.3, omega: 0.7 }];
        unicycle_step(&mut exact, &cmd, &params(), 2.0, Parallelism::Sequential);
        for _ in 0..2000 {
            unicycle_step(&mut fine, &cmd, &params(), 0.001, Parallelism::Sequential);
        }
        assert!((exact.pos()[0] - fine.pos()[0]).norm() < 1e-9);
    }

    #[test]
    fn commands_are_clamped() {
        let mut b = one();
        unicycle_step(&mut b, &[UnicycleCmd { v: 100.0, omega: 0.0 }], &params(), 1.0, Parallelism::Sequential);
        assert_eq!(b.pos()[0].x, 5.0);
    }
}
