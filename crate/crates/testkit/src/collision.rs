//! All-pairs collision and neighborhood scan.

use std::collections::BTreeMap;

use swarmstep_core::collision::CollisionConfig;
use swarmstep_core::state::{AgentId, WorldSnapshot};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BruteForce {
    pub collisions: Vec<(AgentId, AgentId)>,
    pub neighbor_sets: BTreeMap<AgentId, Vec<AgentId>>,
}

pub fn brute_force(world: &WorldSnapshot, config: &CollisionConfig) -> BruteForce {
    let mut live = Vec::new();
    for s in &world.sections {
        let r = config.radius(s.type_id());
        for i in 0..s.len() {
            if s.alive()[i] {
                live.push((s.ids()[i], s.pos()[i], r));
            }
        }
    }
    let mut out = BruteForce::default();
    for a in 0..live.len() {
        for b in (a + 1)..live.len() {
            let (ia, pa, ra) = live[a];
            let (ib, pb, rb) = live[b];
            let d = (pa - pb).norm();
            let (lo, hi) = if ia < ib { (ia, ib) } else { (ib, ia) };
            if d < ra + rb {
                out.collisions.push((lo, hi));
            }
            if d < config.r_sense {
                out.neighbor_sets.entry(ia).or_default().push(ib);
                out.neighbor_sets.entry(ib).or_default().push(ia);
            }
        }
    }
    out.collisions.sort_unstable();
    for v in out.neighbor_sets.values_mut() {
        v.sort_unstable();
    }
    out
}
