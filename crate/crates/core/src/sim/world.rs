use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use super::{
    viewer_input_apply, AgentTypeGroup, Command, EventKind, OverlayAction, SimError, SimEvent,
    ViewerInfluence,
};
use crate::collision::{detect, CollisionConfig, CollisionReport, DetectorHandle};
use crate::exec::{for_each_mut, Parallelism};
use crate::state::{AgentId, AgentTypeId, SimClock, WorldSnapshot};

/// Receives every published snapshot together with the events of its tick.
pub trait SnapshotSink: Send {
    fn publish(&mut self, snapshot: &Arc<WorldSnapshot>, events: &[SimEvent]);
}

impl<F> SnapshotSink for F
where
    F: FnMut(&Arc<WorldSnapshot>, &[SimEvent]) + Send,
{
    fn publish(&mut self, snapshot: &Arc<WorldSnapshot>, events: &[SimEvent]) {
        self(snapshot, events)
    }
}

/// Where collision detection runs relative to the main loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollisionMode {
    Off,
    /// Detection on the post-step state, deaths applied before publishing.
    InLoop,
    /// Detection on a separate thread; reports are applied at the top of a later tick.
    OutOfLoop,
}

/// Result of one loop iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    /// Tick reached after the step.
    pub tick: u64,
    pub events: Vec<SimEvent>,
}

/// The central side: owns every group and the all-states table.
pub struct World {
    clock: SimClock,
    groups: Vec<AgentTypeGroup>,
    index: HashMap<AgentId, (usize, usize)>,
    collision: Option<CollisionConfig>,
    mode: CollisionMode,
    detector: Option<DetectorHandle>,
    pending_reports: Vec<CollisionReport>,
    pending_commands: Vec<Command>,
    pending_rejections: Option<Vec<AgentId>>,
    pending_influences: Vec<ViewerInfluence>,
    sinks: Vec<Box<dyn SnapshotSink>>,
    last_snapshot: Option<Arc<WorldSnapshot>>,
    max_report_lag: u64,
    par: Parallelism,
}

impl World {
    /// Builds a world from groups with disjoint agent ids and distinct types.
    /// Groups are kept in ascending type order.
    pub fn new(dt: f64, mut groups: Vec<AgentTypeGroup>, par: Parallelism) -> Result<Self, SimError> {
        groups.sort_by_key(|g| g.batch().type_id());
        let clock = SimClock::new(dt)?;
        let mut index = HashMap::new();
        let mut types = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            let ty = group.batch().type_id();
            if types.contains(&ty) {
                return Err(SimError::DuplicateType(ty));
            }
            types.push(ty);
            for (row, id) in group.batch().ids().iter().enumerate() {
                if index.insert(*id, (g, row)).is_some() {
                    return Err(crate::state::StateError::DuplicateId(*id).into());
                }
            }
        }
        Ok(World {
            clock,
            groups,
            index,
            collision: None,
            mode: CollisionMode::Off,
            detector: None,
            pending_reports: Vec::new(),
            pending_commands: Vec::new(),
            pending_rejections: None,
            pending_influences: Vec::new(),
            sinks: Vec::new(),
            last_snapshot: None,
            max_report_lag: 0,
            par,
        })
    }

    /// Enables collision detection. `OutOfLoop` starts the detector thread.
    pub fn set_collision(&mut self, config: CollisionConfig, mode: CollisionMode) -> Result<(), SimError> {
        config.validate()?;
        self.detector = None;
        if mode == CollisionMode::OutOfLoop {
            self.detector = Some(DetectorHandle::spawn(config.clone(), self.par)?);
        }
        self.collision = (mode != CollisionMode::Off).then_some(config);
        self.mode = mode;
        Ok(())
    }

    pub fn collision_mode(&self) -> CollisionMode {
        self.mode
    }

    pub fn add_sink(&mut self, sink: Box<dyn SnapshotSink>) {
        self.sinks.push(sink);
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn tick(&self) -> u64 {
        self.clock.tick()
    }

    pub fn time(&self) -> f64 {
        self.clock.time()
    }

    pub fn parallelism(&self) -> Parallelism {
        self.par
    }

    pub fn groups(&self) -> &[AgentTypeGroup] {
        &self.groups
    }

    pub fn group(&self, type_id: AgentTypeId) -> Option<&AgentTypeGroup> {
        self.groups.iter().find(|g| g.batch().type_id() == type_id)
    }

    pub fn agent_count(&self) -> usize {
        self.index.len()
    }

    pub fn alive_count(&self) -> usize {
        self.groups.iter().map(|g| g.batch().alive_count()).sum()
    }

    /// Alive count of each type, in group order.
    pub fn alive_by_type(&self) -> Vec<(AgentTypeId, usize)> {
        self.groups.iter().map(|g| (g.batch().type_id(), g.batch().alive_count())).collect()
    }

    /// Deep copy of the current state of every group.
    pub fn snapshot(&self) -> WorldSnapshot {
        let tick = self.clock.tick();
        WorldSnapshot {
            tick,
            time: self.clock.time(),
            sections: self.groups.iter().map(|g| g.batch().snapshot(tick)).collect(),
        }
    }

    /// Largest number of ticks between a snapshot and the application of its
    /// collision report, over all reports applied at the top of a tick.
    pub fn max_report_lag(&self) -> u64 {
        self.max_report_lag
    }

    /// The snapshot published by the most recent tick, if one was taken.
    pub fn last_snapshot(&self) -> Option<&Arc<WorldSnapshot>> {
        self.last_snapshot.as_ref()
    }

    /// Queues a command for the next tick; later commands to the same agent win.
    pub fn submit_command(&mut self, command: Command) {
        self.pending_commands.push(command);
    }

    pub fn submit_commands<I: IntoIterator<Item = Command>>(&mut self, commands: I) {
        self.pending_commands.extend(commands);
    }

    /// Records inputs refused before they became commands, such as a command
    /// with the wrong number of values or a viewer input with an unknown mode.
    /// They are reported with the next tick's rejections; an empty `ids`
    /// still produces an event.
    pub fn reject_inputs(&mut self, ids: &[AgentId]) {
        self.pending_rejections.get_or_insert_with(Vec::new).extend_from_slice(ids);
    }

    /// Queues a viewer influence that acts on the next tick only.
    pub fn submit_influence(&mut self, influence: ViewerInfluence) {
        self.pending_influences.push(influence);
    }

    /// Queues a collision report to be applied at the top of the next tick.
    pub fn queue_report(&mut self, report: CollisionReport) {
        self.pending_reports.push(report);
    }

    /// Runs one loop iteration.
    ///
    /// Order: queued deaths, commands, viewer overlay, group stepping, clock,
    /// in-loop detection, publication.
    pub fn loop_tick(&mut self) -> TickOutcome {
        let mut events = Vec::new();
        let tick = self.clock.tick();

        if let Some(det) = &self.detector {
            self.pending_reports.extend(det.drain().into_iter().map(|o| o.report));
        }
        let reports = std::mem::take(&mut self.pending_reports);
        for report in &reports {
            self.max_report_lag = self.max_report_lag.max(tick.saturating_sub(report.tick));
            self.apply_report(report, tick, &mut events);
        }

        self.apply_commands(tick, &mut events);
        self.apply_influences();

        let dt = self.clock.dt();
        let par = self.par;
        let mut work: Vec<(&mut AgentTypeGroup, Option<Vec<usize>>)> =
            self.groups.iter_mut().map(|g| (g, None)).collect();
        for_each_mut(par, &mut work, |(group, out)| {
            *out = catch_unwind(AssertUnwindSafe(|| group.step(dt, par))).ok();
        });
        let mut fault_ids = Vec::new();
        for (group, out) in work {
            match out {
                Some(rows) => fault_ids.extend(rows.into_iter().map(|r| group.batch().ids()[r])),
                None => {
                    log::error!("group {:?} failed; retiring its agents", group.batch().type_id());
                    let batch = group.batch_mut();
                    for row in 0..batch.len() {
                        if batch.kill(row) {
                            fault_ids.push(batch.ids()[row]);
                        }
                    }
                }
            }
        }
        self.clock.advance();
        let tick = self.clock.tick();
        if !fault_ids.is_empty() {
            fault_ids.sort_unstable();
            events.push(SimEvent { tick, kind: EventKind::FaultDeath, agent_ids: fault_ids });
        }

        let need_snapshot = !self.sinks.is_empty() || self.mode != CollisionMode::Off;
        if need_snapshot {
            let mut snap = self.snapshot();
            if self.mode == CollisionMode::InLoop {
                let report = detect(&snap, self.collision.as_ref().expect("collision config"), par);
                let before = events.len();
                self.apply_report(&report, tick, &mut events);
                if events.len() > before {
                    snap = self.snapshot();
                }
            }
            let snap = Arc::new(snap);
            if let Some(det) = &self.detector {
                det.submit(Arc::clone(&snap));
            }
            for sink in &mut self.sinks {
                sink.publish(&snap, &events);
            }
            self.last_snapshot = Some(snap);
        }
        TickOutcome { tick, events }
    }

    /// Runs `n` ticks and returns all their events.
    pub fn run_ticks(&mut self, n: u64) -> Vec<SimEvent> {
        (0..n).flat_map(|_| self.loop_tick().events).collect()
    }

    fn apply_report(&mut self, report: &CollisionReport, tick: u64, events: &mut Vec<SimEvent>) {
        let mut killed = Vec::new();
        for id in report.colliding_ids() {
            if let Some(&(g, row)) = self.index.get(&id) {
                if self.groups[g].batch_mut().kill(row) {
                    killed.push(id);
                }
            }
        }
        if !killed.is_empty() {
            events.push(SimEvent { tick, kind: EventKind::CollisionDeath, agent_ids: killed });
        }
    }

    fn apply_commands(&mut self, tick: u64, events: &mut Vec<SimEvent>) {
        let prior = self.pending_rejections.take();
        let force = prior.is_some();
        let mut rejected = prior.unwrap_or_default();
        for cmd in std::mem::take(&mut self.pending_commands) {
            let ok = match self.index.get(&cmd.agent_id) {
                Some(&(g, row)) if self.groups[g].batch().alive()[row] && cmd.body.is_finite() => {
                    self.groups[g].apply_command(row, &cmd.body)
                }
                _ => false,
            };
            if !ok {
                rejected.push(cmd.agent_id);
            }
        }
        if force || !rejected.is_empty() {
            rejected.sort_unstable();
            rejected.dedup();
            events.push(SimEvent { tick, kind: EventKind::AgentCommandRejected, agent_ids: rejected });
        }
    }

    fn apply_influences(&mut self) {
        if self.pending_influences.is_empty() {
            return;
        }
        let snap = self.snapshot();
        let mut per_group: Vec<Vec<(usize, OverlayAction)>> = vec![Vec::new(); self.groups.len()];
        for inf in std::mem::take(&mut self.pending_influences) {
            for (id, action) in viewer_input_apply(&inf, &snap).entries {
                let (g, row) = self.index[&id];
                per_group[g].push((row, action));
            }
        }
        for (group, rows) in self.groups.iter_mut().zip(&per_group) {
            if !rows.is_empty() {
                group.set_overlay(rows);
            }
        }
    }
}

impl Drop for World {
    fn drop(&mut self) {
        if let Some(det) = self.detector.take() {
            det.shutdown();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{CommandBody, GroupSpec, InfluenceMode, QuadSetup, UnicycleCmd, UnicycleParams};
    use crate::state::{AgentBatch, InitialPose, Vec3};
    use crate::control::PosSetpoint;

    fn quads(points: &[Vec3], base: u64) -> AgentTypeGroup {
        let poses: Vec<_> = points.iter().map(|p| InitialPose::at(*p)).collect();
        let batch = AgentBatch::create(AgentTypeId(0), &poses, base).unwrap();
        AgentTypeGroup::new(batch, GroupSpec::Quadrotor(QuadSetup::default())).unwrap()
    }

    fn hover_world(n: usize) -> World {
        let pts: Vec<_> = (0..n).map(|i| Vec3::new(i as f64 * 2.0, 0.0, 1.0)).collect();
        World::new(0.01, vec![quads(&pts, 0)], Parallelism::Sequential).unwrap()
    }

    #[test]
    fn hover_is_equilibrium() {
        let mut w = hover_world(3);
        let before = w.snapshot();
        w.run_ticks(50);
        let after = w.snapshot();
        for i in 0..3 {
            let (a, b) = (before.sections[0].row(i), after.sections[0].row(i));
            assert!((a.pos - b.pos).norm() < 1e-12);
            assert!(b.vel.norm() < 1e-12);
        }
        assert_eq!(w.tick(), 50);
    }

    #[test]
    fn queued_collision_kills_pair() {
        let mut w = hover_world(8);
        w.queue_report(CollisionReport { tick: 0, collisions: vec![(AgentId(3), AgentId(7))], ..Default::default() });
        let out = w.loop_tick();
        assert_eq!(w.alive_count(), 6);
        assert_eq!(out.events[0].kind, EventKind::CollisionDeath);
        assert_eq!(out.events[0].agent_ids, vec![AgentId(3), AgentId(7)]);
        // applied at most once
        w.queue_report(CollisionReport { tick: 0, collisions: vec![(AgentId(3), AgentId(7))], ..Default::default() });
        assert!(w.loop_tick().events.is_empty());
    }

    #[test]
    fn command_to_dead_or_unknown_is_rejected() {
        let mut w = hover_world(2);
        w.queue_report(CollisionReport { tick: 0, collisions: vec![(AgentId(0), AgentId(1))], ..Default::default() });
        w.loop_tick();
        let before = w.snapshot();
        let body = CommandBody::Position(PosSetpoint::hold(Vec3::new(9.0, 9.0, 9.0), 0.0));
        w.submit_command(Command { agent_id: AgentId(0), body });
        w.submit_command(Command { agent_id: AgentId(99), body });
        let out = w.loop_tick();
        assert_eq!(out.events[0].kind, EventKind::AgentCommandRejected);
        assert_eq!(out.events[0].agent_ids, vec![AgentId(0), AgentId(99)]);
        assert_eq!(before.sections[0].pos(), w.snapshot().sections[0].pos());
    }

    #[test]
    fn latest_command_wins() {
        let mut w = hover_world(1);
        let first = PosSetpoint::hold(Vec3::new(1.0, 0.0, 1.0), 0.0);
        let second = PosSetpoint::hold(Vec3::new(-1.0, 0.0, 1.0), 0.0);
        w.submit_command(Command { agent_id: AgentId(0), body: CommandBody::Position(first) });
        w.submit_command(Command { agent_id: AgentId(0), body: CommandBody::Position(second) });
        w.loop_tick();
        let crate::sim::GroupModel::Quadrotor(q) = w.groups()[0].model() else { panic!() };
        assert_eq!(q.position_setpoint(0), second);
    }

    #[test]
    fn wrong_level_is_rejected() {
        let mut w = hover_world(1);
        w.submit_command(Command { agent_id: AgentId(0), body: CommandBody::Unicycle(UnicycleCmd { v: 1.0, omega: 0.0 }) });
        assert_eq!(w.loop_tick().events[0].kind, EventKind::AgentCommandRejected);
    }

    #[test]
    fn two_types_advance_together() {
        let q = quads(&[Vec3::new(0.0, 0.0, 1.0)], 0);
        let ub = AgentBatch::create(AgentTypeId(1), &[InitialPose::at(Vec3::ZERO)], 100).unwrap();
        let u = AgentTypeGroup::new(ub, GroupSpec::Unicycle(UnicycleParams::default())).unwrap();
        let mut w = World::new(0.1, vec![q, u], Parallelism::Parallel).unwrap();
        w.submit_command(Command { agent_id: AgentId(100), body: CommandBody::Unicycle(UnicycleCmd { v: 1.0, omega: 0.0 }) });
        w.run_ticks(10);
        let s = w.snapshot();
        assert_eq!(s.sections.len(), 2);
        assert!((s.section(AgentTypeId(1)).unwrap().pos()[0].x - 1.0).abs() < 1e-12);
        assert!((w.time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let a = quads(&[Vec3::ZERO], 0);
        let ub = AgentBatch::create(AgentTypeId(1), &[InitialPose::at(Vec3::ZERO)], 0).unwrap();
        let b = AgentTypeGroup::new(ub, GroupSpec::Unicycle(UnicycleParams::default())).unwrap();
        assert!(World::new(0.1, vec![a, b], Parallelism::Sequential).is_err());
    }

    #[test]
    fn in_loop_collision_same_tick() {
        let g = quads(&[Vec3::new(0.0, 0.0, 1.0), Vec3::new(0.2, 0.0, 1.0)], 0);
        let mut w = World::new(0.01, vec![g], Parallelism::Sequential).unwrap();
        w.set_collision(CollisionConfig::default(), CollisionMode::InLoop).unwrap();
        let out = w.loop_tick();
        assert_eq!(out.events[0].kind, EventKind::CollisionDeath);
        assert_eq!(w.last_snapshot().unwrap().alive_count(), 0);
    }

    #[test]
    fn sinks_see_every_tick() {
        let mut w = hover_world(1);
        let seen = Arc::new(std::sync::Mutex::new(Vec::new()));
        let s2 = Arc::clone(&seen);
        w.add_sink(Box::new(move |snap: &Arc<WorldSnapshot>, _: &[SimEvent]| s2.lock().unwrap().push(snap.tick)));
        w.run_ticks(3);
        assert_eq!(*seen.lock().unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn influence_lasts_one_tick() {
        let mut w = hover_world(1);
        let inf = ViewerInfluence { mode: InfluenceMode::Repel, point: Vec3::new(-1.0, 0.0, 1.0), radius: 5.0, strength: 2.0 };
        w.submit_influence(inf);
        w.loop_tick();
        let v1 = w.snapshot().sections[0].vel()[0];
        assert!(v1.norm() > 0.0);
        let crate::sim::GroupModel::Quadrotor(q) = w.groups()[0].model() else { panic!() };
        assert_eq!(q.position_setpoint(0).v_sp, Vec3::ZERO);
    }

    #[test]
    fn empty_world_ticks() {
        let mut w = World::new(0.01, Vec::new(), Parallelism::Parallel).unwrap();
        w.add_sink(Box::new(|snap: &Arc<WorldSnapshot>, _: &[SimEvent]| assert_eq!(snap.agent_count(), 0)));
        w.run_ticks(100);
        assert_eq!(w.tick(), 100);
        assert!((w.time() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn undecodable_inputs_are_reported() {
        let mut w = hover_world(2);
        w.reject_inputs(&[AgentId(1)]);
        let out = w.loop_tick();
        assert_eq!(out.events[0].kind, EventKind::AgentCommandRejected);
        assert_eq!(out.events[0].agent_ids, vec![AgentId(1)]);
        w.reject_inputs(&[]);
        assert_eq!(w.loop_tick().events[0].agent_ids, Vec::<AgentId>::new());
        assert!(w.loop_tick().events.is_empty());
    }
}
