//! The `run` loop: world, endpoints, optional in-loop algorithm and pacing.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use swarmstep_core::exec::Parallelism;
use swarmstep_core::sim::SimConfig;
use swarmstep_core::state::AgentTypeId;
use swarmstep_wire::{apply_inbound, CircleStrategy, ControlMsg, Hub, HubAddrs, HubConfig, HubStats};

use crate::record::RecordSink;
use crate::stats::RoundStats;
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// No endpoints, whatever the config says.
    pub headless: bool,
    pub realtime_factor: Option<f64>,
    pub tick_limit: Option<u64>,
    pub record: Option<PathBuf>,
    /// Raised by the caller to end the run after the current tick.
    pub stop: Option<Arc<AtomicBool>>,
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TickLimit,
    ControlStop,
    Signal,
    AllDead,
}

#[derive(Debug, Clone)]
pub struct ExitReport {
    pub ticks: u64,
    pub sim_time: f64,
    pub wall: Duration,
    pub alive: Vec<(AgentTypeId, usize)>,
    /// Time spent inside the loop iteration, excluding pacing and input handling.
    pub rounds: RoundStats,
    pub hub: Option<HubStats>,
    pub reason: StopReason,
}

/// Pause and pacing state changed by control messages.
#[derive(Debug, Clone, Copy)]
struct Pace {
    factor: f64,
    paused: bool,
    anchor_wall: Instant,
    anchor_sim: f64,
}

impl Pace {
    fn reanchor(&mut self, sim: f64) {
        self.anchor_wall = Instant::now();
        self.anchor_sim = sim;
    }

    /// Wall instant at which sim time `sim` is due.
    fn due(&self, sim: f64) -> Option<Instant> {
        (self.factor > 0.0).then(|| self.anchor_wall + Duration::from_secs_f64((sim - self.anchor_sim) / self.factor))
    }
}

fn apply_control(msg: ControlMsg, pace: &mut Pace, sim: f64) -> bool {
    match msg {
        ControlMsg::Stop => return true,
        ControlMsg::Start => {
            pace.paused = false;
            pace.reanchor(sim);
        }
        ControlMsg::SetParam { name, value } => match (name.as_str(), value.as_f64(), value.as_bool()) {
            ("realtime_factor", Some(f), _) if f.is_finite() && f >= 0.0 => {
                pace.factor = f;
                pace.reanchor(sim);
            }
            ("paused", _, Some(p)) => {
                pace.paused = p;
                pace.reanchor(sim);
            }
            _ => log::warn!("ignoring set_param {name} = {value}"),
        },
        ControlMsg::Hello { .. } => {}
    }
    false
}

/// Runs the configured world until its tick limit, a `stop` control
/// message, the caller's stop flag, or (with collisions on) the last death.
///
/// `on_ready` is called once endpoints are listening, before the first tick.
pub fn run(
    config: &SimConfig,
    opts: &RunOptions,
    on_ready: impl FnOnce(Option<&HubAddrs>),
) -> Result<ExitReport, CliError> {
    let par = if opts.sequential { Parallelism::Sequential } else { Parallelism::Parallel };
    let mut world = config.build_world(par)?;
    let dt = config.sim.dt;

    let hub = if opts.headless || !config.net.enabled {
        None
    } else {
        let hub = Hub::start(&HubConfig::from_net(&config.net, dt)).map_err(CliError::Endpoints)?;
        world.add_sink(Box::new(hub.sink()));
        Some(hub)
    };
    if let Some(path) = &opts.record {
        world.add_sink(Box::new(RecordSink::create(path, dt)?));
    }
    let strategy = (config.algorithm.in_loop && config.algorithm.strategy == "circle")
        .then(|| CircleStrategy::from(&config.algorithm.circle));

    let tick_limit = opts.tick_limit.unwrap_or(config.sim.tick_limit);
    let factor = opts.realtime_factor.unwrap_or(config.sim.realtime_factor);
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(CliError::Sim(swarmstep_core::sim::SimError::Config(format!(
            "realtime factor must be non-negative, got {factor}"
        ))));
    }
    let stop_requested = || opts.stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed));
    let had_agents = world.alive_count() > 0;

    on_ready(hub.as_ref().map(|h| h.addrs()).as_ref());

    let started = Instant::now();
    let mut pace = Pace { factor, paused: false, anchor_wall: started, anchor_sim: 0.0 };
    let mut rounds = RoundStats::default();
    let reason = loop {
        if tick_limit > 0 && world.tick() >= tick_limit {
            break StopReason::TickLimit;
        }
        if stop_requested() {
            break StopReason::Signal;
        }
        let mut stop = false;
        if let Some(hub) = &hub {
            for msg in apply_inbound(&mut world, hub.drain()) {
                stop |= apply_control(msg, &mut pace, world.time());
            }
        }
        if stop {
            break StopReason::ControlStop;
        }
        if pace.paused {
            if let Some(hub) = &hub {
                if let Some(item) = hub.recv_timeout(Duration::from_millis(20)) {
                    for msg in apply_inbound(&mut world, [item]) {
                        stop |= apply_control(msg, &mut pace, world.time());
                    }
                }
            } else {
                std::thread::sleep(Duration::from_millis(20));
            }
            if stop {
                break StopReason::ControlStop;
            }
            continue;
        }
        if let Some(s) = &strategy {
            let cmds = s.for_world(&world.snapshot());
            world.submit_commands(cmds);
        }

        let t0 = Instant::now();
        world.loop_tick();
        rounds.push(t0.elapsed());

        if had_agents && world.collision_mode() != swarmstep_core::sim::CollisionMode::Off && world.alive_count() == 0 {
            break StopReason::AllDead;
        }
        if let Some(due) = pace.due(world.time()) {
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
    };

    let report = ExitReport {
        ticks: world.tick(),
        sim_time: world.time(),
        wall: started.elapsed(),
        alive: world.alive_by_type(),
        rounds,
        hub: hub.as_ref().map(|h| h.stats()),
        reason,
    };
    drop(world);
    if let Some(h) = hub {
        h.shutdown();
    }
    Ok(report)
}

impl std::fmt::Display for ExitReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let reason = match self.reason {
            StopReason::TickLimit => "tick limit reached",
            StopReason::ControlStop => "stop requested by a client",
            StopReason::Signal => "interrupted",
            StopReason::AllDead => "no agents left alive",
        };
        writeln!(f, "stopped     {reason}")?;
        writeln!(f, "ticks       {} ({:.3} s simulated in {:.3} s)", self.ticks, self.sim_time, self.wall.as_secs_f64())?;
        writeln!(f, "round       {:.4} ± {:.4} ms", self.rounds.mean(), self.rounds.sd())?;
        for (ty, n) in &self.alive {
            writeln!(f, "type {:<6} {n} alive", ty.0)?;
        }
        if let Some(h) = &self.hub {
            writeln!(
                f,
                "endpoints   {} clients accepted, {} snapshots published, {} dropped for slow readers",
                h.accepted, h.published, h.dropped
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use swarmstep_wire::ControlMsg;

    fn pace() -> Pace {
        Pace { factor: 1.0, paused: false, anchor_wall: Instant::now(), anchor_sim: 0.0 }
    }

    #[test]
    fn control_messages_update_pacing() {
        let mut p = pace();
        let set = |name: &str, v: f64| ControlMsg::SetParam { name: name.into(), value: v.into() };
        assert!(!apply_control(set("realtime_factor", 4.0), &mut p, 2.0));
        assert_eq!(p.factor, 4.0);
        assert_eq!(p.anchor_sim, 2.0);
        assert!(!apply_control(set("realtime_factor", -1.0), &mut p, 3.0));
        assert_eq!(p.factor, 4.0);
        let pause = ControlMsg::SetParam { name: "paused".into(), value: true.into() };
        apply_control(pause, &mut p, 3.0);
        assert!(p.paused);
        apply_control(ControlMsg::Start, &mut p, 3.0);
        assert!(!p.paused);
        assert!(apply_control(ControlMsg::Stop, &mut p, 3.0));
    }

    #[test]
    fn unpaced_when_factor_is_zero() {
        let mut p = pace();
        assert!(p.due(1.0).is_some());
        p.factor = 0.0;
        assert!(p.due(1.0).is_none());
    }
}
