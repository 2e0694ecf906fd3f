use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use swarmstep_core::dynamics::{allocation_matrix, rk4_step, Mixer, QuadParams, Rk4Scratch, WrenchCmd};
use swarmstep_core::exec::Parallelism;
use swarmstep_core::state::{AgentBatch, AgentTypeId, Vec3};
use swarmstep_testkit::checks::{
    ballistic_error, batch_vs_scalar, hover_split_error, mixer_identity_error, tumbling_drift, yaw_spin_error,
};
use swarmstep_testkit::{alloc, random};

#[test]
fn batch_matches_scalar_oracle() {
    let err = batch_vs_scalar(7, 256, 1000, 1e-3, 50, Parallelism::Parallel);
    assert!(err < 1e-12, "max relative error {err:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn batch_matches_scalar_for_any_seed(seed in any::<u64>(), n in 1usize..40, hold in 1usize..20) {
        let err = batch_vs_scalar(seed, n, 60, 2e-3, hold, Parallelism::Sequential);
        prop_assert!(err < 1e-12, "max relative error {:e}", err);
    }
}

#[test]
fn ballistic_closed_form() {
    // p = -g t²/2, v = -g t at t = 1 s
    let [dp, dv, drift] = ballistic_error(100, 0.01);
    assert!(dp < 1e-9 && dv < 1e-9, "{dp:e} {dv:e}");
    assert_eq!(drift, 0.0);
}

#[test]
fn attitude_closed_form() {
    assert!(yaw_spin_error(5e-3) < 1e-6);
}

#[test]
fn rk4_is_fourth_order() {
    let (coarse, fine) = (yaw_spin_error(0.05), yaw_spin_error(0.025));
    let ratio = coarse / fine;
    assert!((14.0..=18.0).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn torque_free_tumbling_conserves_momentum() {
    assert_eq!(QuadParams::default().inertia, Vec3::new(0.01, 0.01, 0.02));
    let d = tumbling_drift(10_000, 1e-3);
    assert!(d.momentum < 1e-6, "momentum drift {:e}", d.momentum);
    assert!(d.norm < 1e-9, "norm drift {:e}", d.norm);
}

#[test]
fn mixer_inverse_matches_closed_form() {
    let p = QuadParams::default();
    let mixer = Mixer::new(&p).unwrap();
    let g = allocation_matrix(&p).unwrap();
    let oracle_g = alloc::allocation(&p);
    let oracle_inv = alloc::inverse(&p);
    for r in 0..4 {
        for c in 0..4 {
            assert!((g.0[r][c] - oracle_g[(r, c)]).abs() < 1e-15);
            assert!((mixer.inverse().0[r][c] - oracle_inv[(r, c)]).abs() < 1e-12 * oracle_inv.abs().max());
        }
    }
    let worst = mixer_identity_error();
    assert!(worst < 1e-12, "{worst:e}");
}

#[test]
fn hover_wrench_splits_evenly() {
    let (worst, saturated) = hover_split_error();
    assert!(worst < 1e-12, "{worst:e}");
    assert!(!saturated);
}

proptest! {
    #[test]
    fn mixer_realizes_feasible_wrenches(f in proptest::array::uniform4(0.0f64..16.0)) {
        let p = QuadParams::default();
        let mixer = Mixer::new(&p).unwrap();
        let w = mixer.forward(swarmstep_core::dynamics::MotorThrusts(f));
        let out = mixer.mix(w);
        for (got, want) in out.motors.0.iter().zip(f) {
            prop_assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn mixer_output_is_always_feasible(fc in -50.0f64..100.0, t in proptest::array::uniform3(-5.0f64..5.0)) {
        let p = QuadParams::default();
        let out = Mixer::new(&p).unwrap().mix(WrenchCmd::new(fc, Vec3::new(t[0], t[1], t[2])));
        for m in out.motors.0 {
            prop_assert!((0.0..=p.f_motor_max()).contains(&m));
        }
    }
}

#[test]
fn sequential_and_parallel_steps_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = QuadParams::default();
    let poses: Vec<_> = (0..3000).map(|_| random::quad_pose(&mut rng)).collect();
    let wrench: Vec<_> = (0..3000).map(|_| random::wrench(&mut rng, &p)).collect();
    let mut a = AgentBatch::create(AgentTypeId(0), &poses, 0).unwrap();
    let mut b = a.clone();
    let (mut sa, mut sb) = (Rk4Scratch::new(), Rk4Scratch::new());
    for _ in 0..20 {
        rk4_step(&mut a, &wrench, &p, 1e-3, &mut sa, Parallelism::Sequential);
        rk4_step(&mut b, &wrench, &p, 1e-3, &mut sb, Parallelism::Parallel);
    }
    assert_eq!(a.pos(), b.pos());
    assert_eq!(a.quat(), b.quat());
    assert_eq!(a.omega(), b.omega());
}
