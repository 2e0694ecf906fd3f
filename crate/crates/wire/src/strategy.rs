//! Example algorithm: every agent of one type flies its assigned circle.

use swarmstep_core::control::circle_reference;
use swarmstep_core::sim::{CircleLayout, CircleStrategyConfig, Command, CommandBody};
use swarmstep_core::state::{AgentId, WorldSnapshot};

use crate::snapshot::SnapshotMsg;

/// Row `k` of the target type is assigned `layout.slot(k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleStrategy {
    pub type_id: u16,
    /// rad/s
    pub omega: f64,
    pub layout: CircleLayout,
}

impl From<&CircleStrategyConfig> for CircleStrategy {
    fn from(c: &CircleStrategyConfig) -> Self {
        CircleStrategy { type_id: c.type_id, omega: c.omega, layout: c.layout }
    }
}

impl CircleStrategy {
    /// Position setpoints at time `t` for the alive rows.
    pub fn commands<'a>(
        &self,
        t: f64,
        ids: impl Iterator<Item = u64> + 'a,
        alive: impl Iterator<Item = bool> + 'a,
    ) -> Vec<Command> {
        ids.zip(alive)
            .enumerate()
            .filter(|(_, (_, alive))| *alive)
            .map(|(k, (id, _))| {
                let s = self.layout.slot(k);
                Command {
                    agent_id: AgentId(id),
                    body: CommandBody::Position(circle_reference(t, s.radius, self.omega, s.z, s.phase)),
                }
            })
            .collect()
    }

    /// In-process form, used when the algorithm runs inside the loop.
    pub fn for_world(&self, world: &WorldSnapshot) -> Vec<Command> {
        world
            .sections
            .iter()
            .filter(|s| s.type_id().0 == self.type_id)
            .flat_map(|s| self.commands(world.time, s.ids().iter().map(|id| id.0), s.alive().iter().copied()))
            .collect()
    }
}

/// Commands for a received snapshot. Snapshot time is `tick · dt`.
pub fn circle_swarm_strategy(snapshot: &SnapshotMsg, dt: f64, strategy: &CircleStrategy) -> Vec<Command> {
    let t = snapshot.tick as f64 * dt;
    snapshot
        .sections
        .iter()
        .filter(|s| s.type_id == strategy.type_id)
        .flat_map(|s| strategy.commands(t, s.ids.iter().copied(), s.alive.iter().copied()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::snapshot::SnapshotSection;
    use swarmstep_core::state::Vec3;

    fn snap(n: usize, tick: u64) -> SnapshotMsg {
        SnapshotMsg {
            tick,
            sections: vec![SnapshotSection {
                type_id: 0,
                ids: (0..n as u64).collect(),
                alive: vec![true; n],
                pos: vec![[0.0; 3]; n],
                vel: vec![[0.0; 3]; n],
                quat: vec![[1.0, 0.0, 0.0, 0.0]; n],
                omega: vec![[0.0; 3]; n],
            }],
        }
    }

    fn strategy(per_ring: usize) -> CircleStrategy {
        CircleStrategy { type_id: 0, omega: 0.3, layout: CircleLayout { radius: 5.0, per_ring, ..Default::default() } }
    }

    fn target(c: &Command) -> Vec3 {
        let CommandBody::Position(p) = c.body else { panic!("not a position command") };
        p.p_sp
    }

    #[test]
    fn thousand_agents_distinct_phases() {
        let s = snap(1000, 0);
        let cmds = circle_swarm_strategy(&s, 0.01, &strategy(100));
        assert_eq!(cmds.len(), 1000);
        let mut keys: Vec<(i64, i64, i64)> = cmds
            .iter()
            .map(|c| {
                let p = target(c);
                ((p.x * 1e6).round() as i64, (p.y * 1e6).round() as i64, (p.z * 1e6).round() as i64)
            })
            .collect();
        keys.sort_unstable();
        keys.dedup();
        assert_eq!(keys.len(), 1000);
    }

    #[test]
    fn dead_agent_skipped() {
        let mut s = snap(3, 5);
        s.sections[0].alive[1] = false;
        let ids: Vec<u64> = circle_swarm_strategy(&s, 0.01, &strategy(3)).iter().map(|c| c.agent_id.0).collect();
        assert_eq!(ids, vec![0, 2]);
    }

    #[test]
    fn start_is_phase_zero_points() {
        let st = strategy(4);
        for (k, c) in circle_swarm_strategy(&snap(4, 0), 0.01, &st).iter().enumerate() {
            let slot = st.layout.slot(k);
            let want = Vec3::new(slot.radius * slot.phase.cos(), slot.radius * slot.phase.sin(), slot.z);
            assert!((target(c) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn other_types_ignored() {
        let mut s = snap(2, 0);
        s.sections[0].type_id = 4;
        assert!(circle_swarm_strategy(&s, 0.01, &strategy(2)).is_empty());
    }
}
