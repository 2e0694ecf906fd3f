//! Per-round timing of the main loop over growing quadrotor counts.
//!
//! Each repeat builds a fresh world, runs the warmup rounds untimed, then
//! times every one of the timed rounds. A round is one `loop_tick`:
//! commands, the controllers and RK4 for every agent, and, when enabled,
//! collision detection and snapshot publication.

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use swarmstep_core::collision::CollisionConfig;
use swarmstep_core::exec::Parallelism;
use swarmstep_core::sim::{AgentTypeGroup, CollisionMode, GroupSpec, Layout, QuadSetup, World};
use swarmstep_core::state::{AgentBatch, AgentTypeId};
use swarmstep_wire::{Hub, HubConfig};

use crate::stats::RoundStats;
use crate::CliError;

pub const CSV_HEADER: &str = "n_agents,repeat,mean_ms,sd_ms";

pub const DEFAULT_COUNTS: [usize; 6] = [64, 256, 1024, 4096, 8192, 10_000];

/// Generous upper bound on memory per quadrotor: state, controller, RK4
/// stages, snapshot row and grid entry.
const BYTES_PER_AGENT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchSpec {
    pub agent_counts: Vec<usize>,
    pub warmup_rounds: u64,
    pub timed_rounds: u64,
    pub repeats: u32,
}

impl BenchSpec {
    /// Sorts and deduplicates the counts; every number must be positive.
    pub fn new(mut agent_counts: Vec<usize>, warmup_rounds: u64, timed_rounds: u64, repeats: u32) -> Result<Self, CliError> {
        if agent_counts.is_empty() {
            return Err(CliError::Bench("no agent counts given".into()));
        }
        if agent_counts.contains(&0) {
            return Err(CliError::Bench("agent counts must be positive".into()));
        }
        if warmup_rounds == 0 || timed_rounds == 0 || repeats == 0 {
            return Err(CliError::Bench("warmup, timed and repeats must be positive".into()));
        }
        agent_counts.sort_unstable();
        agent_counts.dedup();
        Ok(BenchSpec { agent_counts, warmup_rounds, timed_rounds, repeats })
    }

    /// 500 warmup rounds, 2000 timed rounds, three repeats.
    pub fn standard(agent_counts: Vec<usize>) -> Result<Self, CliError> {
        Self::new(agent_counts, 500, 2000, 3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BenchOptions {
    /// In-loop collision detection every round.
    pub with_collision: bool,
    /// Publish every round to a loopback client through the endpoints.
    pub with_wire: bool,
    pub sequential: bool,
}

impl BenchOptions {
    fn par(&self) -> Parallelism {
        if self.sequential {
            Parallelism::Sequential
        } else {
            Parallelism::Parallel
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountResult {
    pub n_agents: usize,
    /// One accumulator per repeat, in run order.
    pub repeats: Vec<RoundStats>,
}

impl CountResult {
    /// All timed rounds of every repeat taken together.
    pub fn pooled(&self) -> RoundStats {
        self.repeats.iter().fold(RoundStats::default(), |acc, r| acc.merge(r))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CountOutcome {
    Done(CountResult),
    Skipped { n_agents: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchResult {
    pub spec: BenchSpec,
    pub options: BenchOptions,
    pub counts: Vec<CountOutcome>,
    pub elapsed: Duration,
}

impl BenchResult {
    pub fn done(&self) -> impl Iterator<Item = &CountResult> {
        self.counts.iter().filter_map(|c| match c {
            CountOutcome::Done(r) => Some(r),
            CountOutcome::Skipped { .. } => None,
        })
    }

    /// Pooled mean round time for `n` agents, ms.
    pub fn mean_ms(&self, n: usize) -> Option<f64> {
        self.done().find(|r| r.n_agents == n).map(|r| r.pooled().mean())
    }

    /// One row per repeat.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in self.done() {
            for (k, s) in r.repeats.iter().enumerate() {
                writeln!(w, "{},{},{:.6},{:.6}", r.n_agents, k + 1, s.mean(), s.sd())?;
            }
        }
        Ok(())
    }

    /// Mean ± SD per count over all timed rounds, followed by each repeat's mean.
    pub fn write_table<W: Write>(&self, mut w: W) -> io::Result<()> {
        let spec = &self.spec;
        writeln!(
            w,
            "Running time per round: {} warmup + {} timed rounds, {} repeat(s){}{}",
            spec.warmup_rounds,
            spec.timed_rounds,
            spec.repeats,
            if self.options.with_collision { ", collision on" } else { "" },
            if self.options.with_wire { ", endpoints on" } else { "" },
        )?;
        writeln!(w, "{:>10} | {:>22} | repeat means (ms)", "agents", "mean ± SD (ms)")?;
        writeln!(w, "{:-<11}+{:-<24}+{:-<20}", "", "", "")?;
        for c in &self.counts {
            match c {
                CountOutcome::Done(r) => {
                    let p = r.pooled();
                    let each: Vec<String> = r.repeats.iter().map(|s| format!("{:.4}", s.mean())).collect();
                    let cell = format!("{:.4} ± {:.4}", p.mean(), p.sd());
                    writeln!(w, "{:>10} | {:>22} | {}", r.n_agents, cell, each.join(", "))?;
                }
                CountOutcome::Skipped { n_agents, reason } => {
                    writeln!(w, "{n_agents:>10} | {:>22} | {reason}", "skipped")?;
                }
            }
        }
        writeln!(w, "total {:.1} s", self.elapsed.as_secs_f64())
    }
}

/// `n` quadrotors holding position on a 1 m grid at 1 m altitude.
pub fn bench_world(n: usize, options: &BenchOptions) -> Result<World, CliError> {
    let layout = Layout::Grid { spacing: 1.0, columns: None, origin: [0.0, 0.0, 1.0] };
    let poses = layout.poses(n)?;
    let batch = AgentBatch::create(AgentTypeId(0), &poses, 0).map_err(swarmstep_core::sim::SimError::from)?;
    let group = AgentTypeGroup::new(batch, GroupSpec::Quadrotor(QuadSetup::default()))?;
    let mut world = World::new(0.01, vec![group], options.par())?;
    if options.with_collision {
        world.set_collision(CollisionConfig::default(), CollisionMode::InLoop)?;
    }
    Ok(world)
}

fn check_memory(n: usize) -> Result<(), String> {
    let bytes = n.checked_mul(BYTES_PER_AGENT).ok_or_else(|| format!("{n} agents overflow the address space"))?;
    let mut probe: Vec<u8> = Vec::new();
    probe
        .try_reserve_exact(bytes)
        .map_err(|e| format!("insufficient memory for {n} agents ({} MiB): {e}", bytes >> 20))
}

/// Times `timed` rounds after `warmup` untimed ones.
pub fn time_rounds(world: &mut World, warmup: u64, timed: u64) -> RoundStats {
    for _ in 0..warmup {
        world.loop_tick();
    }
    let mut stats = RoundStats::default();
    for _ in 0..timed {
        let t0 = Instant::now();
        world.loop_tick();
        stats.push(t0.elapsed());
    }
    stats
}

/// Mean round time in ms from one clock reading around all `rounds`.
pub fn loop_only_mean_ms(world: &mut World, rounds: u64) -> f64 {
    let t0 = Instant::now();
    for _ in 0..rounds {
        world.loop_tick();
    }
    t0.elapsed().as_secs_f64() * 1e3 / rounds as f64
}

/// Loopback endpoints with one client that reads and discards everything.
struct WireLoad {
    hub: Hub,
    reader: Option<JoinHandle<()>>,
}

impl WireLoad {
    fn attach(world: &mut World) -> Result<Self, CliError> {
        let hub = Hub::start(&HubConfig { ws_port: None, ..HubConfig::ephemeral(world.clock().dt()) })
            .map_err(CliError::Endpoints)?;
        let mut stream = TcpStream::connect(hub.addrs().viewer)?;
        let reader = std::thread::spawn(move || {
            let mut buf = vec![0u8; 1 << 16];
            while matches!(stream.read(&mut buf), Ok(n) if n > 0) {}
        });
        let deadline = Instant::now() + Duration::from_secs(5);
        while hub.client_count() == 0 && Instant::now() < deadline {
            std::thread::sleep(Duration::from_millis(5));
        }
        world.add_sink(Box::new(hub.sink()));
        Ok(WireLoad { hub, reader: Some(reader) })
    }

    fn finish(mut self) {
        self.hub.shutdown();
        if let Some(r) = self.reader.take() {
            let _ = r.join();
        }
    }
}

/// Runs every count of `spec`. `progress` receives one line per finished repeat.
pub fn run_bench(
    spec: &BenchSpec,
    options: &BenchOptions,
    mut progress: impl FnMut(&str),
) -> Result<BenchResult, CliError> {
    let started = Instant::now();
    let mut counts = Vec::with_capacity(spec.agent_counts.len());
    for &n in &spec.agent_counts {
        if let Err(reason) = check_memory(n) {
            progress(&format!("n={n}: skipped, {reason}"));
            counts.push(CountOutcome::Skipped { n_agents: n, reason });
            continue;
        }
        let mut repeats = Vec::with_capacity(spec.repeats as usize);
        for k in 0..spec.repeats {
            let mut world = bench_world(n, options)?;
            let wire = if options.with_wire { Some(WireLoad::attach(&mut world)?) } else { None };
            let stats = time_rounds(&mut world, spec.warmup_rounds, spec.timed_rounds);
            drop(world);
            if let Some(w) = wire {
                w.finish();
            }
            progress(&format!("n={n} repeat {}/{}: {:.4} ± {:.4} ms", k + 1, spec.repeats, stats.mean(), stats.sd()));
            repeats.push(stats);
        }
        counts.push(CountOutcome::Done(CountResult { n_agents: n, repeats }));
    }
    Ok(BenchResult { spec: spec.clone(), options: *options, counts, elapsed: started.elapsed() })
}
