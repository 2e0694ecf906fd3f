use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::math::{UnitQuat, Vec3};
use super::StateError;

/// Stable agent identifier, unique across all types for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u64);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Tag of a homogeneous agent type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentTypeId(pub u16);

/// Initial condition of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialPose {
    pub pos: Vec3,
    #[serde(default)]
    pub quat: UnitQuat,
    #[serde(default)]
    pub vel: Vec3,
    #[serde(default)]
    pub omega: Vec3,
}

impl InitialPose {
    pub fn at(pos: Vec3) -> Self {
        InitialPose { pos, quat: UnitQuat::IDENTITY, vel: Vec3::ZERO, omega: Vec3::ZERO }
    }

    pub fn with_quat(mut self, quat: UnitQuat) -> Self {
        self.quat = quat;
        self
    }

    pub fn with_vel(mut self, vel: Vec3) -> Self {
        self.vel = vel;
        self
    }

    pub fn with_omega(mut self, omega: Vec3) -> Self {
        self.omega = omega;
        self
    }
}

/// Read-only per-agent view of one batch row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentRow {
    pub id: AgentId,
    pub alive: bool,
    pub pos: Vec3,
    pub vel: Vec3,
    pub quat: UnitQuat,
    pub omega: Vec3,
}

/// Columnar state of one homogeneous agent type.
///
/// Rows are never removed: a dead row keeps its last state and is skipped by
/// every kernel, so row indices stay stable for the whole run.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentBatch {
    type_id: AgentTypeId,
    pub(crate) ids: Vec<AgentId>,
    pub(crate) alive: Vec<bool>,
    pub(crate) pos: Vec<Vec3>,
    pub(crate) vel: Vec<Vec3>,
    pub(crate) quat: Vec<UnitQuat>,
    pub(crate) omega: Vec<Vec3>,
}

fn alloc_column<T: Clone>(n: usize, fill: T) -> Result<Vec<T>, StateError> {
    let mut v = Vec::new();
    v.try_reserve_exact(n).map_err(|_| StateError::OutOfMemory { rows: n })?;
    v.resize(n, fill);
    Ok(v)
}

impl AgentBatch {
    /// A batch with no rows.
    pub fn empty(type_id: AgentTypeId) -> Self {
        AgentBatch {
            type_id,
            ids: Vec::new(),
            alive: Vec::new(),
            pos: Vec::new(),
            vel: Vec::new(),
            quat: Vec::new(),
            omega: Vec::new(),
        }
    }

    /// Creates `poses.len()` live agents with ids `id_base..id_base + n`.
    pub fn create(
        type_id: AgentTypeId,
        poses: &[InitialPose],
        id_base: u64,
    ) -> Result<Self, StateError> {
        let ids: Vec<AgentId> = (0..poses.len() as u64).map(|i| AgentId(id_base + i)).collect();
        Self::with_ids(type_id, poses, &ids)
    }

    /// Creates live agents with explicitly requested ids.
    pub fn with_ids(
        type_id: AgentTypeId,
        poses: &[InitialPose],
        ids: &[AgentId],
    ) -> Result<Self, StateError> {
        let n = poses.len();
        if n == 0 {
            return Err(StateError::EmptyBatch);
        }
        if ids.len() != n {
            return Err(StateError::ColumnLength { expected: n, found: ids.len() });
        }
        let mut seen = HashSet::with_capacity(n);
        for id in ids {
            if !seen.insert(*id) {
                return Err(StateError::DuplicateId(*id));
            }
        }

        let mut batch = AgentBatch {
            type_id,
            ids: alloc_column(n, AgentId(0))?,
            alive: alloc_column(n, true)?,
            pos: alloc_column(n, Vec3::ZERO)?,
            vel: alloc_column(n, Vec3::ZERO)?,
            quat: alloc_column(n, UnitQuat::IDENTITY)?,
            omega: alloc_column(n, Vec3::ZERO)?,
        };
        for (i, p) in poses.iter().enumerate() {
            if !(p.pos.is_finite() && p.vel.is_finite() && p.omega.is_finite()) {
                return Err(StateError::NonFinite("initial pose"));
            }
            // Re-validate: poses built through serde or struct literals may carry
            // a quaternion that has drifted.
            let q = UnitQuat::from_unit(p.quat.quat())?;
            batch.ids[i] = ids[i];
            batch.pos[i] = p.pos;
            batch.vel[i] = p.vel;
            batch.quat[i] = q;
            batch.omega[i] = p.omega;
        }
        Ok(batch)
    }

    pub fn type_id(&self) -> AgentTypeId {
        self.type_id
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[AgentId] {
        &self.ids
    }
    pub fn alive(&self) -> &[bool] {
        &self.alive
    }
    pub fn pos(&self) -> &[Vec3] {
        &self.pos
    }
    pub fn vel(&self) -> &[Vec3] {
        &self.vel
    }
    pub fn quat(&self) -> &[UnitQuat] {
        &self.quat
    }
    pub fn omega(&self) -> &[Vec3] {
        &self.omega
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }

    pub fn row(&self, i: usize) -> AgentRow {
        AgentRow {
            id: self.ids[i],
            alive: self.alive[i],
            pos: self.pos[i],
            vel: self.vel[i],
            quat: self.quat[i],
            omega: self.omega[i],
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = AgentRow> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    /// Marks row `i` dead. Returns `true` if it was alive.
    pub fn kill(&mut self, i: usize) -> bool {
        std::mem::replace(&mut self.alive[i], false)
    }

    /// Deep copy of the batch tagged with `tick`.
    pub fn snapshot(&self, tick: u64) -> BatchSnapshot {
        BatchSnapshot {
            tick,
            type_id: self.type_id,
            ids: self.ids.clone(),
            alive: self.alive.clone(),
            pos: self.pos.clone(),
            vel: self.vel.clone(),
            quat: self.quat.clone(),
            omega: self.omega.clone(),
        }
    }

    /// True when every column has `len()` rows.
    pub fn columns_consistent(&self) -> bool {
        let n = self.ids.len();
        [self.alive.len(), self.pos.len(), self.vel.len(), self.quat.len(), self.omega.len()]
            .iter()
            .all(|&l| l == n)
    }
}

/// Immutable copy of one batch at a given tick.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSnapshot {
    tick: u64,
    type_id: AgentTypeId,
    ids: Vec<AgentId>,
    alive: Vec<bool>,
    pos: Vec<Vec3>,
    vel: Vec<Vec3>,
    quat: Vec<UnitQuat>,
    omega: Vec<Vec3>,
}

impl BatchSnapshot {
    pub fn tick(&self) -> u64 {
        self.tick
    }
    pub fn type_id(&self) -> AgentTypeId {
        self.type_id
    }
    pub fn len(&self) -> usize {
        self.ids.len()
    }
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
    pub fn ids(&self) -> &[AgentId] {
        &self.ids
    }
    pub fn alive(&self) -> &[bool] {
        &self.alive
    }
    pub fn pos(&self) -> &[Vec3] {
        &self.pos
    }
    pub fn vel(&self) -> &[Vec3] {
        &self.vel
    }
    pub fn quat(&self) -> &[UnitQuat] {
        &self.quat
    }
    pub fn omega(&self) -> &[Vec3] {
        &self.omega
    }
    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|a| **a).count()
    }
    pub fn row(&self, i: usize) -> AgentRow {
        AgentRow {
            id: self.ids[i],
            alive: self.alive[i],
            pos: self.pos[i],
            vel: self.vel[i],
            quat: self.quat[i],
            omega: self.omega[i],
        }
    }
}

/// Snapshot of every agent type at one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldSnapshot {
    pub tick: u64,
    /// Simulated time of the snapshot, `tick · dt`.
    pub time: f64,
    pub sections: Vec<BatchSnapshot>,
}

impl WorldSnapshot {
    pub fn alive_count(&self) -> usize {
        self.sections.iter().map(BatchSnapshot::alive_count).sum()
    }

    pub fn agent_count(&self) -> usize {
        self.sections.iter().map(BatchSnapshot::len).sum()
    }

    pub fn section(&self, type_id: AgentTypeId) -> Option<&BatchSnapshot> {
        self.sections.iter().find(|s| s.type_id() == type_id)
    }

    /// Looks up an agent by id. Linear in the number of agents.
    pub fn find(&self, id: AgentId) -> Option<(AgentTypeId, AgentRow)> {
        self.sections.iter().find_map(|s| {
            s.ids().iter().position(|x| *x == id).map(|i| (s.type_id(), s.row(i)))
        })
    }
}

/// Fixed-step simulation clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    tick: u64,
    dt: f64,
}

impl SimClock {
    pub fn new(dt: f64) -> Result<Self, StateError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(StateError::InvalidStep(dt));
        }
        Ok(SimClock { tick: 0, dt })
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Simulated time `tick · dt`.
    pub fn time(&self) -> f64 {
        self.tick as f64 * self.dt
    }

    pub fn advance(&mut self) {
        self.tick += 1;
    }
}
