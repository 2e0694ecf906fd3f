//! Batched rigid-body derivative and classical RK4 step.
//!
//! Each RK4 stage is one pass over the whole batch. Stage derivatives live in
//! preallocated scratch columns so a steady-state step does not allocate.

use super::{QuadParams, WrenchCmd};
use crate::exec::{for_each_chunk, Parallelism};
use crate::state::{AgentBatch, Quat, UnitQuat, Vec3};

/// Derivative columns `(ṗ, v̇, q̇, ω̇)` for a whole batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateDerivative {
    pub dpos: Vec<Vec3>,
    pub dvel: Vec<Vec3>,
    pub dquat: Vec<Quat>,
    pub domega: Vec<Vec3>,
}

impl StateDerivative {
    pub fn with_len(n: usize) -> Self {
        let mut d = StateDerivative::default();
        d.resize(n);
        d
    }

    pub fn len(&self) -> usize {
        self.dpos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dpos.is_empty()
    }

    fn resize(&mut self, n: usize) {
        self.dpos.resize(n, Vec3::ZERO);
        self.dvel.resize(n, Vec3::ZERO);
        self.dquat.resize(n, Quat::default());
        self.domega.resize(n, Vec3::ZERO);
    }
}

/// Constants of the derivative kernel derived once from [`QuadParams`].
#[derive(Debug, Clone, Copy)]
struct DerivConsts {
    inv_mass: f64,
    gravity: f64,
    inertia: Vec3,
}

impl DerivConsts {
    fn new(p: &QuadParams) -> Self {
        DerivConsts { inv_mass: 1.0 / p.mass, gravity: p.gravity, inertia: p.inertia }
    }
}

/// Derivative of one agent. `q` need not be unit; its direction is used for
/// the thrust rotation and its raw value for the kinematics.
#[inline(always)]
fn deriv_row(
    vel: Vec3,
    q: Quat,
    omega: Vec3,
    w: WrenchCmd,
    c: &DerivConsts,
) -> (Vec3, Vec3, Quat, Vec3) {
    let inv_n2 = 1.0 / (q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    // third column of R(q) scaled by the collective thrust
    let acc_thrust = w.f_c * c.inv_mass;
    let zb = Vec3::new(
        2.0 * (q.x * q.z + q.w * q.y) * inv_n2,
        2.0 * (q.y * q.z - q.w * q.x) * inv_n2,
        1.0 - 2.0 * (q.x * q.x + q.y * q.y) * inv_n2,
    );
    let dvel = Vec3::new(zb.x * acc_thrust, zb.y * acc_thrust, zb.z * acc_thrust - c.gravity);
    let dquat = q.hamilton(Quat::pure(omega)).scale(0.5);
    let i_omega = c.inertia.mul_elem(omega);
    let domega = (w.tau - omega.cross(i_omega)).div_elem(c.inertia);
    (vel, dvel, dquat, domega)
}

#[inline]
fn quat_is_finite(q: &Quat) -> bool {
    q.is_finite()
}

/// Evaluates the rigid-body derivative for every row of `batch`.
///
/// Dead rows get exactly zero derivatives. Rows whose derivative is not
/// finite are zeroed as well and their indices returned, so the caller can
/// retire them.
pub fn dynamics_deriv(
    batch: &AgentBatch,
    wrench: &[WrenchCmd],
    params: &QuadParams,
    out: &mut StateDerivative,
    par: Parallelism,
) -> Vec<usize> {
    let n = batch.len();
    assert_eq!(wrench.len(), n, "wrench column length");
    out.resize(n);
    let c = DerivConsts::new(params);
    let mut fault = vec![false; n];
    let quats: &[UnitQuat] = batch.quat();
    for_each_chunk(
        par,
        (
            (batch.alive(), batch.vel(), quats, batch.omega(), wrench),
            (&mut out.dpos[..], &mut out.dvel[..], &mut out.dquat[..], &mut out.domega[..]),
            &mut fault[..],
        ),
        &|((alive, vel, quat, omega, wr), (dp, dv, dq, dw), fault), _| {
            for i in 0..alive.len() {
                if !alive[i] {
                    dp[i] = Vec3::ZERO;
                    dv[i] = Vec3::ZERO;
                    dq[i] = Quat::default();
                    dw[i] = Vec3::ZERO;
                    continue;
                }
                let (a, b, q, w) = deriv_row(vel[i], quat[i].quat(), omega[i], wr[i], &c);
                if a.is_finite() && b.is_finite() && quat_is_finite(&q) && w.is_finite() {
                    dp[i] = a;
                    dv[i] = b;
                    dq[i] = q;
                    dw[i] = w;
                } else {
                    fault[i] = true;
                    dp[i] = Vec3::ZERO;
                    dv[i] = Vec3::ZERO;
                    dq[i] = Quat::default();
                    dw[i] = Vec3::ZERO;
                }
            }
        },
    );
    fault.iter().enumerate().filter_map(|(i, f)| f.then_some(i)).collect()
}

/// Reusable stage storage for [`rk4_step`].
#[derive(Debug, Clone, Default)]
pub struct Rk4Scratch {
    k: [StateDerivative; 4],
    fault: Vec<bool>,
}

impl Rk4Scratch {
    pub fn new() -> Self {
        Self::default()
    }

    fn ensure(&mut self, n: usize) {
        if self.fault.len() != n {
            for k in &mut self.k {
                k.resize(n);
            }
            self.fault.resize(n, false);
        }
    }
}

/// One stage: derivative at `y + h·k_prev` (or at `y` for the first stage).
fn rk4_stage(
    batch: &AgentBatch,
    wrench: &[WrenchCmd],
    c: &DerivConsts,
    prev: Option<(&StateDerivative, f64)>,
    out: &mut StateDerivative,
    par: Parallelism,
) {
    let quats: &[UnitQuat] = batch.quat();
    let state = (batch.alive(), batch.vel(), quats, batch.omega(), wrench);
    let outs = (&mut out.dpos[..], &mut out.dvel[..], &mut out.dquat[..], &mut out.domega[..]);
    match prev {
        None => for_each_chunk(par, (state, outs), &|((alive, vel, quat, omega, wr), (dp, dv, dq, dw)), _| {
            for i in 0..alive.len() {
                if !alive[i] {
                    continue;
                }
                let (a, b, q, w) = deriv_row(vel[i], quat[i].quat(), omega[i], wr[i], c);
                dp[i] = a;
                dv[i] = b;
                dq[i] = q;
                dw[i] = w;
            }
        }),
        Some((k, h)) => {
            let kin = (&k.dvel[..], &k.dquat[..], &k.domega[..]);
            for_each_chunk(
                par,
                (state, kin, outs),
                &|((alive, vel, quat, omega, wr), (kv, kq, kw), (dp, dv, dq, dw)), _| {
                    for i in 0..alive.len() {
                        if !alive[i] {
                            continue;
                        }
                        let v = vel[i] + kv[i] * h;
                        let q = quat[i].quat().plus(kq[i].scale(h));
                        let w = omega[i] + kw[i] * h;
                        let (a, b, qd, wd) = deriv_row(v, q, w, wr[i], c);
                        dp[i] = a;
                        dv[i] = b;
                        dq[i] = qd;
                        dw[i] = wd;
                    }
                },
            );
        }
    }
}

/// Advances every live row of `batch` by `dt` with classical RK4, holding
/// `wrench` constant over the step.
///
/// Quaternions are renormalized once after the step. A row whose new state
/// is not finite keeps its previous state, is marked dead, and its index is
/// returned.
pub fn rk4_step(
    batch: &mut AgentBatch,
    wrench: &[WrenchCmd],
    params: &QuadParams,
    dt: f64,
    scratch: &mut Rk4Scratch,
    par: Parallelism,
) -> Vec<usize> {
    let n = batch.len();
    assert_eq!(wrench.len(), n, "wrench column length");
    assert!(dt > 0.0, "dt must be positive");
    scratch.ensure(n);
    let c = DerivConsts::new(params);
    let half = 0.5 * dt;

    let [k1, k2, k3, k4] = &mut scratch.k;
    rk4_stage(batch, wrench, &c, None, k1, par);
    rk4_stage(batch, wrench, &c, Some((k1, half)), k2, par);
    rk4_stage(batch, wrench, &c, Some((k2, half)), k3, par);
    rk4_stage(batch, wrench, &c, Some((k3, dt)), k4, par);

    let sixth = dt / 6.0;
    let k = (&k1.dpos[..], &k2.dpos[..], &k3.dpos[..], &k4.dpos[..]);
    let kv = (&k1.dvel[..], &k2.dvel[..], &k3.dvel[..], &k4.dvel[..]);
    let kq = (&k1.dquat[..], &k2.dquat[..], &k3.dquat[..], &k4.dquat[..]);
    let kw = (&k1.domega[..], &k2.domega[..], &k3.domega[..], &k4.domega[..]);
    let state = (
        &batch.alive[..],
        &mut batch.pos[..],
        &mut batch.vel[..],
        &mut batch.quat[..],
        &mut batch.omega[..],
    );
    for_each_chunk(
        par,
        (state, (k, kv, kq, kw), &mut scratch.fault[..]),
        &|((alive, pos, vel, quat, omega), ((p1, p2, p3, p4), (v1, v2, v3, v4), (q1, q2, q3, q4), (w1, w2, w3, w4)), fault), _| {
            for i in 0..alive.len() {
                fault[i] = false;
                if !alive[i] {
                    continue;
                }
                let p = pos[i] + (p1[i] + (p2[i] + p3[i]) * 2.0 + p4[i]) * sixth;
                let v = vel[i] + (v1[i] + (v2[i] + v3[i]) * 2.0 + v4[i]) * sixth;
                let dq = q1[i].plus(q2[i].plus(q3[i]).scale(2.0)).plus(q4[i]);
                let q = quat[i].quat().plus(dq.scale(sixth));
                let w = omega[i] + (w1[i] + (w2[i] + w3[i]) * 2.0 + w4[i]) * sixth;
                let qn = q.norm();
                if p.is_finite() && v.is_finite() && w.is_finite() && q.is_finite() && qn > 1e-12 {
                    pos[i] = p;
                    vel[i] = v;
                    quat[i] = UnitQuat::renormalize_unchecked(q);
                    omega[i] = w;
                } else {
                    fault[i] = true;
                }
            }
        },
    );

    let mut faults = Vec::new();
    for (i, f) in scratch.fault.iter().enumerate() {
        if *f {
            batch.alive[i] = false;
            faults.push(i);
        }
    }
    faults
}
