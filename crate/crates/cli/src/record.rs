//! Snapshot stream recording and replay.
//!
//! A recording is the byte stream a viewer would have received: a hello
//! frame followed by event and snapshot frames, back to back.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use swarmstep_core::sim::{EventKind, SimEvent, SnapshotSink};
use swarmstep_core::state::WorldSnapshot;
use swarmstep_wire::{
    encode_frame, encode_world_payload, ControlMsg, FrameDecoder, Message, MSG_SNAPSHOT, PROTOCOL_VERSION,
};

use crate::CliError;

/// Writes every published tick to a file. Stops recording after the first
/// write error.
pub struct RecordSink {
    path: PathBuf,
    out: Option<BufWriter<File>>,
    payload: Vec<u8>,
    frame: Vec<u8>,
}

impl RecordSink {
    pub fn create(path: &Path, dt: f64) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
        let mut out = BufWriter::new(file);
        out.write_all(&Message::Control(ControlMsg::Hello { version: PROTOCOL_VERSION, dt }).encode())?;
        Ok(RecordSink { path: path.to_path_buf(), out: Some(out), payload: Vec::new(), frame: Vec::new() })
    }

    fn write(&mut self, snapshot: &WorldSnapshot, events: &[SimEvent]) -> std::io::Result<()> {
        let Some(out) = self.out.as_mut() else { return Ok(()) };
        for e in events {
            out.write_all(&Message::Event(e.clone()).encode())?;
        }
        self.payload.clear();
        encode_world_payload(snapshot, &mut self.payload);
        self.frame.clear();
        encode_frame(MSG_SNAPSHOT, &self.payload, &mut self.frame);
        out.write_all(&self.frame)
    }
}

impl SnapshotSink for RecordSink {
    fn publish(&mut self, snapshot: &Arc<WorldSnapshot>, events: &[SimEvent]) {
        if let Err(e) = self.write(snapshot, events) {
            log::error!("recording to {} stopped: {e}", self.path.display());
            self.out = None;
        }
    }
}

impl Drop for RecordSink {
    fn drop(&mut self) {
        if let Some(mut out) = self.out.take() {
            if let Err(e) = out.flush() {
                log::error!("could not flush {}: {e}", self.path.display());
            }
        }
    }
}

/// Contents of a recording.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplaySummary {
    pub dt: Option<f64>,
    pub snapshots: u64,
    pub first_tick: Option<u64>,
    pub last_tick: Option<u64>,
    /// Snapshots whose tick did not increase by exactly one.
    pub gaps: u64,
    pub agents: usize,
    /// Alive count per type id in the last snapshot.
    pub alive: Vec<(u16, usize)>,
    pub events: BTreeMap<String, u64>,
    pub unknown_frames: u64,
    /// Bytes after the last complete frame.
    pub trailing_bytes: usize,
}

fn kind_name(kind: EventKind) -> &'static str {
    match kind {
        EventKind::CollisionDeath => "collision_death",
        EventKind::FaultDeath => "fault_death",
        EventKind::AgentCommandRejected => "agent_command_rejected",
    }
}

/// Decodes a recording. `each` sees every snapshot in order.
pub fn replay<F>(path: &Path, mut each: F) -> Result<ReplaySummary, CliError>
where
    F: FnMut(&swarmstep_wire::SnapshotMsg),
{
    let mut file = File::open(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })?;
    let mut decoder = FrameDecoder::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut s = ReplaySummary::default();
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        decoder.push(&buf[..n]);
        while let Some(frame) = decoder.next_frame()? {
            match Message::from_frame(&frame)? {
                Some(Message::Snapshot(snap)) => {
                    if s.last_tick.is_some_and(|t| snap.tick != t + 1) {
                        s.gaps += 1;
                    }
                    s.first_tick.get_or_insert(snap.tick);
                    s.last_tick = Some(snap.tick);
                    s.snapshots += 1;
                    s.agents = snap.agent_count();
                    s.alive = snap.sections.iter().map(|sec| (sec.type_id, sec.alive_count())).collect();
                    each(&snap);
                }
                Some(Message::Event(e)) => *s.events.entry(kind_name(e.kind).to_string()).or_default() += 1,
                Some(Message::Control(ControlMsg::Hello { dt, .. })) => s.dt = Some(dt),
                Some(_) => {}
                None => s.unknown_frames += 1,
            }
        }
    }
    s.trailing_bytes = decoder.buffered();
    Ok(s)
}

impl fmt::Display for ReplaySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dt {
            Some(dt) => writeln!(f, "dt          {dt} s")?,
            None => writeln!(f, "dt          unknown (no hello frame)")?,
        }
        write!(f, "snapshots   {}", self.snapshots)?;
        if let (Some(a), Some(b)) = (self.first_tick, self.last_tick) {
            write!(f, " (ticks {a}..={b}, {} gaps)", self.gaps)?;
        }
        writeln!(f)?;
        writeln!(f, "agents      {}", self.agents)?;
        for (ty, alive) in &self.alive {
            writeln!(f, "  type {ty:<5} {alive} alive")?;
        }
        let total: u64 = self.events.values().sum();
        writeln!(f, "events      {total}")?;
        for (kind, n) in &self.events {
            writeln!(f, "  {kind:<24} {n}")?;
        }
        if self.unknown_frames > 0 {
            writeln!(f, "unknown     {} frames skipped", self.unknown_frames)?;
        }
        if self.trailing_bytes > 0 {
            writeln!(f, "truncated   {} bytes after the last frame", self.trailing_bytes)?;
        }
        Ok(())
    }
}
