use std::time::Duration;

use proptest::prelude::*;

use swarmstep_core::collision::CollisionConfig;
use swarmstep_core::control::PosSetpoint;
use swarmstep_core::exec::Parallelism;
use swarmstep_core::sim::{
    AgentTypeGroup, CollisionMode, Command, CommandBody, EventKind, GroupSpec, QuadSetup, UnicycleCmd,
    UnicycleParams, World,
};
use swarmstep_core::state::{AgentBatch, AgentId, AgentTypeId, InitialPose, Vec3};
use swarmstep_testkit::scenarios;

#[test]
fn scripted_runs_are_bit_identical() {
    let a = scenarios::scripted_run(5, 400, Parallelism::Parallel);
    let b = scenarios::scripted_run(5, 400, Parallelism::Parallel);
    let c = scenarios::scripted_run(5, 400, Parallelism::Sequential);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_ne!(a, scenarios::scripted_run(6, 400, Parallelism::Parallel));
}

fn quad_group(n: usize) -> AgentTypeGroup {
    let poses: Vec<_> = (0..n).map(|i| InitialPose::at(Vec3::new(i as f64, 5.0, 1.0))).collect();
    let b = AgentBatch::create(AgentTypeId(0), &poses, 0).unwrap();
    AgentTypeGroup::new(b, GroupSpec::Quadrotor(QuadSetup::default())).unwrap()
}

fn car_group() -> AgentTypeGroup {
    let poses: Vec<_> = (0..3).map(|i| InitialPose::at(Vec3::new(i as f64, -5.0, 0.0))).collect();
    let b = AgentBatch::create(AgentTypeId(1), &poses, 50).unwrap();
    AgentTypeGroup::new(b, GroupSpec::Unicycle(UnicycleParams::default())).unwrap()
}

#[test]
fn types_do_not_couple_without_collision() {
    let mut both = World::new(0.01, vec![quad_group(4), car_group()], Parallelism::Parallel).unwrap();
    let mut alone = World::new(0.01, vec![car_group()], Parallelism::Parallel).unwrap();
    for k in 0..300u64 {
        let target = PosSetpoint::hold(Vec3::new((k % 7) as f64, 0.0, 2.0), 0.3);
        both.submit_command(Command { agent_id: AgentId(k % 4), body: CommandBody::Position(target) });
        if k == 0 {
            let drive = Command { agent_id: AgentId(51), body: CommandBody::Unicycle(UnicycleCmd { v: 1.0, omega: 0.2 }) };
            both.submit_command(drive);
            alone.submit_command(drive);
        }
        both.loop_tick();
        alone.loop_tick();
        let (sa, sb) = (both.snapshot(), alone.snapshot());
        assert_eq!(sa.section(AgentTypeId(1)).unwrap().pos(), sb.section(AgentTypeId(1)).unwrap().pos());
        assert_eq!(sa.section(AgentTypeId(1)).unwrap().quat(), sb.section(AgentTypeId(1)).unwrap().quat());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn deaths_are_monotone_and_dead_rows_frozen(
        n in 2usize..30,
        spacing in 0.2f64..1.0,
        targets in proptest::collection::vec((0usize..30, -2.0f64..2.0, -2.0f64..2.0), 1..20),
    ) {
        let poses: Vec<_> = (0..n).map(|i| InitialPose::at(Vec3::new((i % 5) as f64 * spacing, (i / 5) as f64 * spacing, 1.0))).collect();
        let b = AgentBatch::create(AgentTypeId(0), &poses, 0).unwrap();
        let g = AgentTypeGroup::new(b, GroupSpec::Quadrotor(QuadSetup::default())).unwrap();
        let mut w = World::new(0.01, vec![g], Parallelism::Parallel).unwrap();
        w.set_collision(CollisionConfig::default(), CollisionMode::InLoop).unwrap();
        let mut prev = w.snapshot();
        for (k, (who, x, y)) in targets.iter().cycle().take(200).enumerate() {
            if k % 10 == 0 {
                let sp = PosSetpoint::hold(Vec3::new(*x, *y, 1.0), 0.0);
                w.submit_command(Command { agent_id: AgentId((*who % n) as u64), body: CommandBody::Position(sp) });
            }
            w.loop_tick();
            let now = w.snapshot();
            let (p, c) = (&prev.sections[0], &now.sections[0]);
            for i in 0..n {
                prop_assert!(!c.alive()[i] || p.alive()[i], "agent {} revived", i);
                if !p.alive()[i] {
                    prop_assert_eq!(p.row(i), c.row(i));
                }
            }
            prev = now;
        }
    }
}

#[test]
fn in_loop_death_on_overlap_tick() {
    let r = scenarios::head_on(CollisionMode::InLoop, 1.0, 0.01, None);
    assert_eq!(r.death_tick, r.overlap_tick);
    assert_eq!(r.alive, [0, 0]);
    assert!(r.alive_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn out_of_loop_death_within_detector_latency() {
    let r = scenarios::head_on(CollisionMode::OutOfLoop, 1.0, 0.01, Some(Duration::from_millis(2)));
    assert!(r.death_tick > r.overlap_tick);
    assert!(r.death_tick <= r.overlap_tick + 1 + r.report_lag, "{r:?}");
    assert!(r.alive_history.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn hover_recovers_from_rate_kick() {
    for dir in [Vec3::X, Vec3::Y, Vec3::Z, Vec3::new(1.0, -1.0, 0.5)] {
        let hist = scenarios::hover_recovery(dir / dir.norm() * 0.5, 1e-3, 3.0);
        let worst = hist[1999..].iter().copied().fold(0.0, f64::max);
        assert!(worst < 0.01, "{dir:?}: {worst}");
    }
}

#[test]
fn small_circle_swarm_tracks() {
    let rms = scenarios::circle_tracking(10, 0.01, 10.0, 30.0, 0.3, Parallelism::Parallel);
    let worst = rms.iter().copied().fold(0.0, f64::max);
    assert!(worst < 0.3, "{worst}");
}

#[test]
fn rejected_commands_leave_state_alone() {
    let mut w = World::new(0.01, vec![quad_group(2)], Parallelism::Sequential).unwrap();
    let nan = PosSetpoint { yaw_sp: f64::NAN, ..PosSetpoint::default() };
    w.submit_command(Command { agent_id: AgentId(0), body: CommandBody::Position(nan) });
    let out = w.loop_tick();
    assert_eq!(out.events[0].kind, EventKind::AgentCommandRejected);
    assert!(w.snapshot().sections[0].vel()[0].norm() < 1e-12);
}
