use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::CollisionError;
use crate::exec::{map_collect, Parallelism};
use crate::state::{AgentId, AgentTypeId, Vec3, WorldSnapshot};

pub type CellKey = (i64, i64, i64);

/// Integer cell containing `pos` for a grid of edge `cell`.
#[inline]
pub fn hash_cell(pos: Vec3, cell: f64) -> CellKey {
    (
        (pos.x / cell).floor() as i64,
        (pos.y / cell).floor() as i64,
        (pos.z / cell).floor() as i64,
    )
}

/// Sphere radii and grid geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CollisionConfig {
    /// Collision radius for types without an explicit entry, m.
    pub default_radius: f64,
    /// Per-type collision radius, m.
    pub radii: BTreeMap<u16, f64>,
    /// Neighbor sensing radius, m.
    pub r_sense: f64,
    /// Grid cell edge, m.
    pub cell: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig { default_radius: 0.15, radii: BTreeMap::new(), r_sense: 1.0, cell: 1.0 }
    }
}

impl CollisionConfig {
    pub fn radius(&self, ty: AgentTypeId) -> f64 {
        self.radii.get(&ty.0).copied().unwrap_or(self.default_radius)
    }

    pub fn max_radius(&self) -> f64 {
        self.radii.values().copied().fold(self.default_radius, f64::max)
    }

    pub fn validate(&self) -> Result<(), CollisionError> {
        for r in std::iter::once(self.default_radius).chain(self.radii.values().copied()) {
            if !(r > 0.0 && r <= self.r_sense) {
                return Err(CollisionError::Radius { r_collide: r, r_sense: self.r_sense });
            }
        }
        if !(self.cell.is_finite() && self.cell >= 2.0 * self.max_radius()) {
            return Err(CollisionError::Cell { cell: self.cell, min: 2.0 * self.max_radius() });
        }
        Ok(())
    }
}

/// Collisions and neighborhoods found in one snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CollisionReport {
    pub tick: u64,
    /// Overlapping pairs `(a, b)` with `a < b`, sorted.
    pub collisions: Vec<(AgentId, AgentId)>,
    /// Sorted ids within the sensing radius, for agents with at least one neighbor.
    pub neighbor_sets: BTreeMap<AgentId, Vec<AgentId>>,
}

impl CollisionReport {
    pub fn empty(tick: u64) -> Self {
        CollisionReport { tick, ..Default::default() }
    }

    pub fn neighbors(&self, id: AgentId) -> &[AgentId] {
        self.neighbor_sets.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every agent id appearing in a collision pair, sorted and deduplicated.
    pub fn colliding_ids(&self) -> Vec<AgentId> {
        let mut ids: Vec<AgentId> = self.collisions.iter().flat_map(|(a, b)| [*a, *b]).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

struct Entry {
    id: AgentId,
    pos: Vec3,
    radius: f64,
}

/// Finds all overlapping pairs and sensing neighborhoods among live agents.
///
/// Broad phase bins agents into a uniform grid; the narrow phase tests exact
/// center distance. Contact at exactly `r_a + r_b` is not a collision.
pub fn detect(snapshot: &WorldSnapshot, config: &CollisionConfig, par: Parallelism) -> CollisionReport {
    let mut entries = Vec::with_capacity(snapshot.alive_count());
    for s in &snapshot.sections {
        let r = config.radius(s.type_id());
        for i in 0..s.len() {
            if s.alive()[i] {
                entries.push(Entry { id: s.ids()[i], pos: s.pos()[i], radius: r });
            }
        }
    }
    if entries.is_empty() {
        return CollisionReport::empty(snapshot.tick);
    }

    let cell = config.cell;
    let mut grid: HashMap<CellKey, Vec<u32>> = HashMap::new();
    for (i, e) in entries.iter().enumerate() {
        grid.entry(hash_cell(e.pos, cell)).or_default().push(i as u32);
    }
    let reach_dist = config.r_sense.max(2.0 * config.max_radius());
    let reach = (reach_dist / cell).ceil() as i64;
    let r_sense2 = config.r_sense * config.r_sense;

    let per_agent: Vec<(Vec<AgentId>, Vec<AgentId>)> = map_collect(par, entries.len(), |i| {
        let a = &entries[i];
        let (cx, cy, cz) = hash_cell(a.pos, cell);
        let mut neighbors = Vec::new();
        let mut hits = Vec::new();
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else { continue };
                    for &j in bucket {
                        if j as usize == i {
                            continue;
                        }
                        let b = &entries[j as usize];
                        let d2 = (a.pos - b.pos).norm_squared();
                        if d2 < r_sense2 {
                            neighbors.push(b.id);
                        }
                        let rr = a.radius + b.radius;
                        if a.id < b.id && d2 < rr * rr {
                            hits.push(b.id);
                        }
                    }
                }
            }
        }
        neighbors.sort_unstable();
        hits.sort_unstable();
        (neighbors, hits)
    });

    let mut report = CollisionReport::empty(snapshot.tick);
    for (e, (neighbors, hits)) in entries.iter().zip(per_agent) {
        report.collisions.extend(hits.into_iter().map(|b| (e.id, b)));
        if !neighbors.is_empty() {
            report.neighbor_sets.insert(e.id, neighbors);
        }
    }
    report.collisions.sort_unstable();
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{AgentBatch, InitialPose};

    fn world(points: &[Vec3]) -> WorldSnapshot {
        let poses: Vec<_> = points.iter().map(|p| InitialPose::at(*p)).collect();
        let b = AgentBatch::create(AgentTypeId(0), &poses, 0).unwrap();
        WorldSnapshot { tick: 4, time: 0.0, sections: vec![b.snapshot(4)] }
    }

    fn cfg(r: f64, sense: f64, cell: f64) -> CollisionConfig {
        CollisionConfig { default_radius: r, radii: BTreeMap::new(), r_sense: sense, cell }
    }

    #[test]
    fn hash_cell_examples() {
        assert_eq!(hash_cell(Vec3::new(2.3, -0.7, 0.1), 1.0), (2, -1, 0));
        assert_eq!(hash_cell(Vec3::ZERO, 1.0), (0, 0, 0));
        assert_eq!(hash_cell(Vec3::new(-1e-9, 0.0, 0.0), 1.0), (-1, 0, 0));
    }

    #[test]
    fn overlapping_pair_found() {
        let w = world(&[Vec3::ZERO, Vec3::new(0.1, 0.0, 0.0)]);
        let r = detect(&w, &cfg(0.1, 1.0, 1.0), Parallelism::Sequential);
        assert_eq!(r.tick, 4);
        assert_eq!(r.collisions, vec![(AgentId(0), AgentId(1))]);
        assert_eq!(r.neighbors(AgentId(0)), &[AgentId(1)]);
        assert_eq!(r.neighbors(AgentId(1)), &[AgentId(0)]);
    }

    #[test]
    fn far_agents_have_nothing() {
        let w = world(&[Vec3::ZERO, Vec3::new(10.0, 0.0, 0.0)]);
        let r = detect(&w, &cfg(0.1, 5.0, 5.0), Parallelism::Sequential);
        assert!(r.collisions.is_empty());
        assert!(r.neighbor_sets.is_empty());
        assert!(r.neighbors(AgentId(0)).is_empty());
    }

    #[test]
    fn exact_contact_is_not_a_collision() {
        let w = world(&[Vec3::ZERO, Vec3::new(0.2, 0.0, 0.0)]);
        let r = detect(&w, &cfg(0.1, 1.0, 1.0), Parallelism::Sequential);
        assert!(r.collisions.is_empty());
        let w = world(&[Vec3::ZERO, Vec3::new(0.199_999_999, 0.0, 0.0)]);
        assert_eq!(detect(&w, &cfg(0.1, 1.0, 1.0), Parallelism::Sequential).collisions.len(), 1);
    }

    #[test]
    fn dead_agents_are_invisible() {
        let poses: Vec<_> = [Vec3::ZERO, Vec3::new(0.05, 0.0, 0.0)].iter().map(|p| InitialPose::at(*p)).collect();
        let mut b = AgentBatch::create(AgentTypeId(0), &poses, 0).unwrap();
        b.kill(1);
        let w = WorldSnapshot { tick: 0, time: 0.0, sections: vec![b.snapshot(0)] };
        let r = detect(&w, &cfg(0.1, 1.0, 1.0), Parallelism::Sequential);
        assert!(r.collisions.is_empty() && r.neighbor_sets.is_empty());
    }

    #[test]
    fn cross_type_radii() {
        let a = AgentBatch::create(AgentTypeId(0), &[InitialPose::at(Vec3::ZERO)], 0).unwrap();
        let b = AgentBatch::create(AgentTypeId(1), &[InitialPose::at(Vec3::new(0.45, 0.0, 0.0))], 1).unwrap();
        let w = WorldSnapshot { tick: 0, time: 0.0, sections: vec![a.snapshot(0), b.snapshot(0)] };
        let mut c = cfg(0.1, 1.0, 1.0);
        assert!(detect(&w, &c, Parallelism::Sequential).collisions.is_empty());
        c.radii.insert(1, 0.4);
        assert_eq!(detect(&w, &c, Parallelism::Sequential).collisions, vec![(AgentId(0), AgentId(1))]);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.1, 1.0, 0.2).validate().is_ok());
        assert!(cfg(0.1, 1.0, 0.1).validate().is_err());
        assert!(cfg(2.0, 1.0, 5.0).validate().is_err());
        assert!(cfg(0.0, 1.0, 5.0).validate().is_err());
    }
}
