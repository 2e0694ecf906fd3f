//! Seeded generators for states, wrenches and collision worlds.

use std::collections::BTreeMap;

use rand::Rng;
use swarmstep_core::collision::CollisionConfig;
use swarmstep_core::dynamics::{QuadParams, WrenchCmd};
use swarmstep_core::state::{AgentBatch, AgentId, AgentTypeId, InitialPose, Quat, UnitQuat, Vec3, WorldSnapshot};

pub fn vec3<R: Rng>(rng: &mut R, half: f64) -> Vec3 {
    Vec3::new(rng.gen_range(-half..=half), rng.gen_range(-half..=half), rng.gen_range(-half..=half))
}

/// Uniform on the unit 3-sphere by rejection from the 4-cube.
pub fn unit_quat<R: Rng>(rng: &mut R) -> UnitQuat {
    loop {
        let q = Quat::new(
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
            rng.gen_range(-1.0..=1.0),
        );
        let n = q.norm();
        if n > 0.1 && n <= 1.0 {
            return UnitQuat::normalize(q).expect("nonzero");
        }
    }
}

pub fn quad_pose<R: Rng>(rng: &mut R) -> InitialPose {
    InitialPose::at(vec3(rng, 10.0))
        .with_vel(vec3(rng, 2.0))
        .with_quat(unit_quat(rng))
        .with_omega(vec3(rng, 3.0))
}

/// Thrust in `[0, 2mg]` and torques up to 0.02 N·m per axis.
pub fn wrench<R: Rng>(rng: &mut R, p: &QuadParams) -> WrenchCmd {
    WrenchCmd::new(rng.gen_range(0.0..=2.0 * p.hover_thrust()), vec3(rng, 0.02))
}

/// Collision geometry with between one and three typed radii.
pub fn collision_config<R: Rng>(rng: &mut R) -> CollisionConfig {
    let default_radius = rng.gen_range(0.05..=0.5);
    let mut radii = BTreeMap::new();
    for ty in 1..rng.gen_range(1..=3u16) {
        radii.insert(ty, rng.gen_range(0.05..=0.5));
    }
    let max_r = radii.values().copied().fold(default_radius, f64::max);
    let r_sense = rng.gen_range(max_r..=2.0);
    let cell = rng.gen_range(2.0 * max_r..=3.0);
    CollisionConfig { default_radius, radii, r_sense, cell }
}

/// A world of up to `n_max` agents over the types of `config`, about a tenth
/// of them dead, packed densely enough that collisions are common. Some
/// agents sit exactly on grid planes or share a position with another.
pub fn collision_world<R: Rng>(rng: &mut R, n_max: usize, config: &CollisionConfig) -> WorldSnapshot {
    let n = rng.gen_range(0..=n_max);
    let n_types = config.radii.len() + 1;
    let side = (n.max(1) as f64).cbrt() * rng.gen_range(0.5..=2.0);
    let mut per_type: Vec<Vec<InitialPose>> = vec![Vec::new(); n_types];
    let mut placed: Vec<Vec3> = Vec::new();
    for _ in 0..n {
        let p = match rng.gen_range(0..10) {
            0 if !placed.is_empty() => placed[rng.gen_range(0..placed.len())],
            1 => {
                let mut p = vec3(rng, side);
                p.x = (p.x / config.cell).round() * config.cell;
                p
            }
            _ => vec3(rng, side),
        };
        placed.push(p);
        per_type[rng.gen_range(0..n_types)].push(InitialPose::at(p));
    }
    let mut next = 0u64;
    let mut sections = Vec::new();
    for (ty, poses) in per_type.iter().enumerate() {
        if poses.is_empty() {
            continue;
        }
        let ids: Vec<AgentId> = (0..poses.len() as u64).map(|k| AgentId(next + 3 * k + k % 3)).collect();
        next += poses.len() as u64 * 3 + 3;
        let mut b = AgentBatch::with_ids(AgentTypeId(ty as u16), poses, &ids).expect("valid batch");
        for i in 0..b.len() {
            if rng.gen_bool(0.1) {
                b.kill(i);
            }
        }
        sections.push(b.snapshot(0));
    }
    WorldSnapshot { tick: 0, time: 0.0, sections }
}
