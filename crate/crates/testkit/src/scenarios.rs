//! Closed-loop runs of the full world used by several suites.

use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use swarmstep_core::collision::CollisionConfig;
use swarmstep_core::control::{circle_reference, PosSetpoint, RateSetpoint};
use swarmstep_core::exec::Parallelism;
use swarmstep_core::sim::{
    AgentTypeGroup, CircleLayout, CollisionMode, Command, CommandBody, GroupSpec, Layout, QuadSetup,
    UnicycleCmd, UnicycleParams, World,
};
use swarmstep_core::state::{AgentBatch, AgentId, AgentTypeId, InitialPose, Vec3, WorldSnapshot};

/// Per-agent RMS distance to the circle reference, sampled after every tick
/// whose time lies in `(transient, transient + window]`.
pub fn circle_tracking(n: usize, dt: f64, transient: f64, window: f64, omega: f64, par: Parallelism) -> Vec<f64> {
    let layout = CircleLayout { radius: 5.0, per_ring: n.max(1), ..Default::default() };
    let poses = Layout::Circle(layout).poses(n).expect("circle layout");
    let batch = AgentBatch::create(AgentTypeId(0), &poses, 0).expect("batch");
    let group = AgentTypeGroup::new(batch, GroupSpec::Quadrotor(QuadSetup::default())).expect("group");
    let mut world = World::new(dt, vec![group], par).expect("world");
    let reference = |i: usize, t: f64| {
        let s = layout.slot(i);
        circle_reference(t, s.radius, omega, s.z, s.phase)
    };
    let steps = ((transient + window) / dt).round() as u64;
    let start = (transient / dt).round() as u64;
    let mut sq = vec![0.0; n];
    let mut samples = 0usize;
    for _ in 0..steps {
        let t = world.time();
        world.submit_commands((0..n).map(|i| Command {
            agent_id: AgentId(i as u64),
            body: CommandBody::Position(reference(i, t)),
        }));
        let tick = world.loop_tick().tick;
        if tick > start {
            let t = world.time();
            let pos = world.groups()[0].batch().pos();
            for (i, acc) in sq.iter_mut().enumerate() {
                *acc += (pos[i] - reference(i, t).p_sp).norm_squared();
            }
            samples += 1;
        }
    }
    sq.into_iter().map(|s| (s / samples as f64).sqrt()).collect()
}

/// `‖ω‖` after every tick of a hovering quadrotor kicked to body rate `omega0`.
pub fn hover_recovery(omega0: Vec3, dt: f64, duration: f64) -> Vec<f64> {
    let pose = InitialPose::at(Vec3::new(0.0, 0.0, 1.0)).with_omega(omega0);
    let batch = AgentBatch::create(AgentTypeId(0), &[pose], 0).expect("batch");
    let group = AgentTypeGroup::new(batch, GroupSpec::Quadrotor(QuadSetup::default())).expect("group");
    let mut world = World::new(dt, vec![group], Parallelism::Sequential).expect("world");
    (0..(duration / dt).round() as u64)
        .map(|_| {
            world.loop_tick();
            world.groups()[0].batch().omega()[0].norm()
        })
        .collect()
}

/// Outcome of two quadrotors flown straight at each other.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadOn {
    /// First snapshot tick at which the spheres overlap.
    pub overlap_tick: u64,
    /// First snapshot tick at which both agents are dead.
    pub death_tick: u64,
    /// Largest snapshot-to-application lag of any applied report, ticks.
    pub report_lag: u64,
    /// Alive counts after every tick.
    pub alive: [usize; 2],
    pub alive_history: Vec<usize>,
}

/// Two quadrotors 4 m apart closing at `speed` each, holding level attitude
/// and hover thrust through rate commands. `pace` sleeps after every tick.
pub fn head_on(mode: CollisionMode, speed: f64, dt: f64, pace: Option<Duration>) -> HeadOn {
    let poses = [
        InitialPose::at(Vec3::new(-2.0, 0.0, 1.0)).with_vel(Vec3::new(speed, 0.0, 0.0)),
        InitialPose::at(Vec3::new(2.0, 0.0, 1.0)).with_vel(Vec3::new(-speed, 0.0, 0.0)),
    ];
    let setup = QuadSetup::default();
    let batch = AgentBatch::create(AgentTypeId(0), &poses, 0).expect("batch");
    let group = AgentTypeGroup::new(batch, GroupSpec::Quadrotor(setup)).expect("group");
    let mut world = World::new(dt, vec![group], Parallelism::Sequential).expect("world");
    let config = CollisionConfig::default();
    let r_sum = 2.0 * config.default_radius;
    world.set_collision(config, mode).expect("collision");
    let hold = RateSetpoint { omega_sp: Vec3::ZERO, f_c_sp: setup.params.hover_thrust() };
    world.submit_commands((0..2).map(|i| Command { agent_id: AgentId(i), body: CommandBody::Rate(hold) }));

    let mut overlap_tick = None;
    let mut alive_history = Vec::new();
    let limit = (10.0 / dt) as u64;
    for _ in 0..limit {
        let tick = world.loop_tick().tick;
        let b = world.groups()[0].batch();
        alive_history.push(b.alive_count());
        if overlap_tick.is_none() && (b.pos()[0] - b.pos()[1]).norm() < r_sum {
            overlap_tick = Some(tick);
        }
        if b.alive_count() == 0 {
            break;
        }
        if let Some(p) = pace {
            std::thread::sleep(p);
        }
    }
    let b = world.groups()[0].batch();
    HeadOn {
        overlap_tick: overlap_tick.expect("agents never overlapped"),
        death_tick: world.tick(),
        report_lag: world.max_report_lag(),
        alive: [b.alive()[0] as usize, b.alive()[1] as usize],
        alive_history,
    }
}

/// A mixed world driven by a seeded command script; returns the final state.
///
/// Twelve quadrotors and four unicycles, in-loop collision, and every few
/// ticks a random command at a random level to a random agent.
pub fn scripted_run(seed: u64, ticks: u64, par: Parallelism) -> WorldSnapshot {
    let quads: Vec<InitialPose> = (0..12)
        .map(|i| InitialPose::at(Vec3::new((i % 4) as f64 * 0.8, (i / 4) as f64 * 0.8, 1.0)))
        .collect();
    let cars: Vec<InitialPose> = (0..4).map(|i| InitialPose::at(Vec3::new(i as f64, -3.0, 0.0))).collect();
    let q = AgentBatch::create(AgentTypeId(0), &quads, 0).expect("quads");
    let c = AgentBatch::create(AgentTypeId(1), &cars, 100).expect("cars");
    let groups = vec![
        AgentTypeGroup::new(q, GroupSpec::Quadrotor(QuadSetup::default())).expect("group"),
        AgentTypeGroup::new(c, GroupSpec::Unicycle(UnicycleParams::default())).expect("group"),
    ];
    let mut world = World::new(0.01, groups, par).expect("world");
    world.set_collision(CollisionConfig::default(), CollisionMode::InLoop).expect("collision");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..ticks {
        if k % 5 == 0 {
            let cmd = if rng.gen_bool(0.75) {
                let id = rng.gen_range(0..12u64);
                let body = match rng.gen_range(0..3) {
                    0 => CommandBody::Position(PosSetpoint {
                        p_sp: Vec3::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(0.5..3.0)),
                        v_sp: Vec3::ZERO,
                        yaw_sp: rng.gen_range(-3.0..3.0),
                    }),
                    1 => CommandBody::Rate(RateSetpoint {
                        omega_sp: Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                        f_c_sp: rng.gen_range(8.0..12.0),
                    }),
                    _ => CommandBody::Motor([0; 4].map(|_| rng.gen_range(15_000.0..16_500.0))),
                };
                Command { agent_id: AgentId(id), body }
            } else {
                Command {
                    agent_id: AgentId(100 + rng.gen_range(0..4u64)),
                    body: CommandBody::Unicycle(UnicycleCmd { v: rng.gen_range(-2.0..2.0), omega: rng.gen_range(-2.0..2.0) }),
                }
            };
            world.submit_command(cmd);
        }
        world.loop_tick();
    }
    world.snapshot()
}

/// Alive-count bookkeeping of a crowded run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CrowdOutcome {
    pub alive_history: Vec<usize>,
    /// Rows that were dead in one snapshot and alive in the next.
    pub revived: usize,
    /// Rows that were dead in one snapshot and changed in the next.
    pub dead_moved: usize,
}

/// `n` quadrotors packed on a grid of `spacing`, with in-loop collision and
/// seeded retargeting every ten ticks, checked snapshot to snapshot.
pub fn crowded_run(seed: u64, n: usize, spacing: f64, ticks: u64, par: Parallelism) -> CrowdOutcome {
    let columns = (n as f64).sqrt().ceil().max(1.0) as usize;
    let poses: Vec<InitialPose> = (0..n)
        .map(|i| InitialPose::at(Vec3::new((i % columns) as f64 * spacing, (i / columns) as f64 * spacing, 1.0)))
        .collect();
    let batch = AgentBatch::create(AgentTypeId(0), &poses, 0).expect("batch");
    let group = AgentTypeGroup::new(batch, GroupSpec::Quadrotor(QuadSetup::default())).expect("group");
    let mut world = World::new(0.01, vec![group], par).expect("world");
    world.set_collision(CollisionConfig::default(), CollisionMode::InLoop).expect("collision");
    let extent = columns as f64 * spacing;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = CrowdOutcome::default();
    let mut prev = world.snapshot();
    for k in 0..ticks {
        if k % 10 == 0 {
            let target = Vec3::new(rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.5..1.5));
            world.submit_command(Command {
                agent_id: AgentId(rng.gen_range(0..n as u64)),
                body: CommandBody::Position(PosSetpoint::hold(target, 0.0)),
            });
        }
        world.loop_tick();
        let now = world.snapshot();
        let (p, c) = (&prev.sections[0], &now.sections[0]);
        for i in 0..n {
            if !p.alive()[i] {
                out.revived += c.alive()[i] as usize;
                out.dead_moved += (p.row(i) != c.row(i)) as usize;
            }
        }
        out.alive_history.push(c.alive_count());
        prev = now;
    }
    out
}
