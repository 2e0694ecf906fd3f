//! Measurements against closed forms and reference implementations.
//!
//! Each function returns the observed error so that unit tests and the
//! acceptance runner apply their thresholds to the same numbers.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use swarmstep_core::collision::detect;
use swarmstep_core::dynamics::{allocation_matrix, rk4_step, Mixer, QuadParams, Rk4Scratch, WrenchCmd};
use swarmstep_core::exec::Parallelism;
use swarmstep_core::state::{AgentBatch, AgentTypeId, InitialPose, UnitQuat, Vec3};

use crate::collision::brute_force;
use crate::scalar::{row_components, ScalarQuad};
use crate::{max_rel_err, random};

fn single(pose: InitialPose) -> AgentBatch {
    AgentBatch::create(AgentTypeId(0), &[pose], 0).expect("batch")
}

/// Runs batch and per-agent oracle side by side with piecewise-constant
/// random wrenches (redrawn every `hold` steps) and returns the worst
/// relative component error. A non-finite step counts as infinite error.
pub fn batch_vs_scalar(seed: u64, n: usize, steps: usize, dt: f64, hold: usize, par: Parallelism) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = QuadParams::default();
    let poses: Vec<_> = (0..n).map(|_| random::quad_pose(&mut rng)).collect();
    let mut batch = AgentBatch::create(AgentTypeId(0), &poses, 0).expect("batch");
    let mut scalar: Vec<ScalarQuad> = (0..n).map(|i| ScalarQuad::from_row(&batch.row(i))).collect();
    let mut scratch = Rk4Scratch::new();
    let mut wrench = vec![WrenchCmd::ZERO; n];
    let mut worst: f64 = 0.0;
    for k in 0..steps {
        if k % hold.max(1) == 0 {
            for w in wrench.iter_mut() {
                *w = random::wrench(&mut rng, &params);
            }
        }
        if !rk4_step(&mut batch, &wrench, &params, dt, &mut scratch, par).is_empty() {
            return f64::INFINITY;
        }
        for (i, s) in scalar.iter_mut().enumerate() {
            s.rk4(wrench[i], &params, dt);
        }
        if k % 100 == 99 || k + 1 == steps {
            for (i, s) in scalar.iter().enumerate() {
                worst = worst.max(max_rel_err(&row_components(&batch.row(i)), &s.components()));
            }
        }
    }
    worst
}

/// Free fall from rest for `steps` steps of `dt`: absolute errors of
/// `p_z` and `v_z` against `−g t²/2` and `−g t`, plus the horizontal drift.
pub fn ballistic_error(steps: usize, dt: f64) -> [f64; 3] {
    let p = QuadParams::default();
    let mut b = single(InitialPose::at(Vec3::ZERO));
    let mut s = Rk4Scratch::new();
    for _ in 0..steps {
        rk4_step(&mut b, &[WrenchCmd::ZERO], &p, dt, &mut s, Parallelism::Sequential);
    }
    let t = steps as f64 * dt;
    let (pos, vel) = (b.pos()[0], b.vel()[0]);
    [
        (pos.z + 0.5 * p.gravity * t * t).abs(),
        (vel.z + p.gravity * t).abs(),
        pos.x.abs().max(pos.y.abs()),
    ]
}

/// Error of the attitude quaternion after spinning at π rad/s about z for
/// 0.5 s, against the exact yaw of π/2.
pub fn yaw_spin_error(dt: f64) -> f64 {
    let p = QuadParams::default();
    let mut b = single(InitialPose::at(Vec3::ZERO).with_omega(Vec3::new(0.0, 0.0, PI)));
    let mut s = Rk4Scratch::new();
    let steps = (0.5 / dt).round() as usize;
    let hover = WrenchCmd::new(p.hover_thrust(), Vec3::ZERO);
    for _ in 0..steps {
        rk4_step(&mut b, &[hover], &p, dt, &mut s, Parallelism::Sequential);
    }
    let q = b.quat()[0].to_array();
    let exact = [FRAC_1_SQRT_2, 0.0, 0.0, FRAC_1_SQRT_2];
    q.iter().zip(exact).map(|(a, e)| (a - e).powi(2)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TumbleDrift {
    /// Worst `‖L(t) − L(0)‖ / ‖L(0)‖` of the inertial angular momentum.
    pub momentum: f64,
    /// Worst `|‖q‖ − 1|`.
    pub norm: f64,
}

/// Torque-free tumbling of the default airframe from an oblique spin.
pub fn tumbling_drift(steps: usize, dt: f64) -> TumbleDrift {
    let p = QuadParams::default();
    let q0 = UnitQuat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), 0.7);
    let mut b = single(InitialPose::at(Vec3::ZERO).with_quat(q0).with_omega(Vec3::new(1.5, -0.8, 2.0)));
    let momentum = |b: &AgentBatch| ScalarQuad::from_row(&b.row(0)).angular_momentum(&p);
    let l0 = momentum(&b);
    let mut s = Rk4Scratch::new();
    let mut out = TumbleDrift { momentum: 0.0, norm: 0.0 };
    for _ in 0..steps {
        rk4_step(&mut b, &[WrenchCmd::ZERO], &p, dt, &mut s, Parallelism::Sequential);
        out.momentum = out.momentum.max((momentum(&b) - l0).norm() / l0.norm());
        out.norm = out.norm.max((b.quat()[0].quat().norm() - 1.0).abs());
    }
    out
}

/// Largest entry of `|G·G⁻¹ − I|` for the default parameters.
pub fn mixer_identity_error() -> f64 {
    let p = QuadParams::default();
    let g = allocation_matrix(&p).expect("allocation");
    let prod = g.mul(Mixer::new(&p).expect("mixer").inverse());
    let mut worst: f64 = 0.0;
    for r in 0..4 {
        for c in 0..4 {
            let e = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((prod.0[r][c] - e).abs());
        }
    }
    worst
}

/// Largest deviation of the mixed hover wrench from `m·g/4` per motor, and
/// whether the mixer reported saturation.
pub fn hover_split_error() -> (f64, bool) {
    let p = QuadParams::default();
    let out = Mixer::new(&p).expect("mixer").mix(WrenchCmd::new(p.mass * p.gravity, Vec3::ZERO));
    let worst = out.motors.0.iter().map(|f| (f - p.mass * p.gravity / 4.0).abs()).fold(0.0, f64::max);
    (worst, out.saturated)
}

/// Number of random worlds whose grid output differs from the all-pairs scan.
pub fn collision_discrepancies(seed: u64, worlds: usize, n_max: usize, par: Parallelism) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bad = 0;
    for _ in 0..worlds {
        let config = random::collision_config(&mut rng);
        let world = random::collision_world(&mut rng, n_max, &config);
        let got = detect(&world, &config, par);
        let want = brute_force(&world, &config);
        if got.collisions != want.collisions || got.neighbor_sets != want.neighbor_sets {
            bad += 1;
        }
    }
    bad
}
