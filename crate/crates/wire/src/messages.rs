//! Typed messages and their payload codecs.

use serde::{Deserialize, Serialize};
use swarmstep_core::control::{PosSetpoint, RateSetpoint};
use swarmstep_core::sim::{Command, CommandBody, InfluenceMode, SimEvent, UnicycleCmd, ViewerInfluence};
use swarmstep_core::state::{AgentId, Vec3};

use crate::frame::Frame;
use crate::snapshot::SnapshotMsg;
use crate::{WireError, MSG_COMMAND, MSG_CONTROL, MSG_EVENT, MSG_SNAPSHOT, MSG_VIEWER_INPUT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandLevel {
    /// p_sp (3), v_sp (3), yaw_sp
    Pos,
    /// body rates (3), collective thrust N
    Rate,
    /// four rotor speeds, RPM
    Motor,
    /// forward speed, turn rate
    Unicycle,
}

impl CommandLevel {
    pub fn arity(self) -> usize {
        match self {
            CommandLevel::Pos => 7,
            CommandLevel::Rate | CommandLevel::Motor => 4,
            CommandLevel::Unicycle => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CommandLevel::Pos => "pos",
            CommandLevel::Rate => "rate",
            CommandLevel::Motor => "motor",
            CommandLevel::Unicycle => "unicycle",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandEntry {
    pub agent_id: u64,
    pub level: CommandLevel,
    pub values: Vec<f64>,
}

impl CommandEntry {
    pub fn from_command(cmd: &Command) -> Self {
        let (level, values) = match cmd.body {
            CommandBody::Position(p) => {
                let mut v = p.p_sp.to_array().to_vec();
                v.extend(p.v_sp.to_array());
                v.push(p.yaw_sp);
                (CommandLevel::Pos, v)
            }
            CommandBody::Rate(r) => {
                let mut v = r.omega_sp.to_array().to_vec();
                v.push(r.f_c_sp);
                (CommandLevel::Rate, v)
            }
            CommandBody::Motor(m) => (CommandLevel::Motor, m.to_vec()),
            CommandBody::Unicycle(u) => (CommandLevel::Unicycle, vec![u.v, u.omega]),
        };
        CommandEntry { agent_id: cmd.agent_id.0, level, values }
    }

    /// Checks the value count. Finiteness and level-to-type fit are judged
    /// by the simulation when the command is applied.
    pub fn to_command(&self) -> Result<Command, WireError> {
        let v = &self.values;
        if v.len() != self.level.arity() {
            return Err(WireError::Arity { level: self.level.name(), expected: self.level.arity(), found: v.len() });
        }
        let body = match self.level {
            CommandLevel::Pos => CommandBody::Position(PosSetpoint {
                p_sp: Vec3::new(v[0], v[1], v[2]),
                v_sp: Vec3::new(v[3], v[4], v[5]),
                yaw_sp: v[6],
            }),
            CommandLevel::Rate => {
                CommandBody::Rate(RateSetpoint { omega_sp: Vec3::new(v[0], v[1], v[2]), f_c_sp: v[3] })
            }
            CommandLevel::Motor => CommandBody::Motor([v[0], v[1], v[2], v[3]]),
            CommandLevel::Unicycle => CommandBody::Unicycle(UnicycleCmd { v: v[0], omega: v[1] }),
        };
        Ok(Command { agent_id: AgentId(self.agent_id), body })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CommandMsg {
    /// Tick of the snapshot the commands were computed from.
    pub tick_hint: u64,
    pub commands: Vec<CommandEntry>,
}

impl CommandMsg {
    pub fn from_commands(tick_hint: u64, commands: &[Command]) -> Self {
        CommandMsg { tick_hint, commands: commands.iter().map(CommandEntry::from_command).collect() }
    }

    /// Splits entries into usable commands and ids whose values had the wrong arity.
    pub fn into_commands(self) -> (Vec<Command>, Vec<AgentId>) {
        let mut ok = Vec::with_capacity(self.commands.len());
        let mut bad = Vec::new();
        for e in &self.commands {
            match e.to_command() {
                Ok(c) => ok.push(c),
                Err(_) => bad.push(AgentId(e.agent_id)),
            }
        }
        (ok, bad)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum ControlMsg {
    Start,
    Stop,
    SetParam { name: String, value: serde_json::Value },
    /// Sent by the server to every client on connect.
    Hello { version: u8, dt: f64 },
}

/// Mouse influence: `mode u8 | point f32×3 | radius f32 | strength f32`, 21 bytes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewerInputMsg {
    pub mode: InfluenceMode,
    pub point: [f32; 3],
    pub radius: f32,
    pub strength: f32,
}

impl ViewerInputMsg {
    pub const LEN: usize = 21;

    pub fn mode_code(mode: InfluenceMode) -> u8 {
        match mode {
            InfluenceMode::Attract => 0,
            InfluenceMode::Repel => 1,
            InfluenceMode::Waypoint => 2,
        }
    }

    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::LEN);
        out.push(Self::mode_code(self.mode));
        for f in self.point.iter().chain([&self.radius, &self.strength]) {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    pub fn decode_payload(p: &[u8]) -> Result<Self, WireError> {
        if p.len() != Self::LEN {
            return Err(WireError::Malformed(format!("viewer input of {} bytes", p.len())));
        }
        let mode = match p[0] {
            0 => InfluenceMode::Attract,
            1 => InfluenceMode::Repel,
            2 => InfluenceMode::Waypoint,
            m => return Err(WireError::UnknownMode(m)),
        };
        let f = |i: usize| f32::from_le_bytes([p[1 + 4 * i], p[2 + 4 * i], p[3 + 4 * i], p[4 + 4 * i]]);
        Ok(ViewerInputMsg { mode, point: [f(0), f(1), f(2)], radius: f(3), strength: f(4) })
    }

    pub fn to_influence(&self) -> ViewerInfluence {
        ViewerInfluence {
            mode: self.mode,
            point: Vec3::new(self.point[0].into(), self.point[1].into(), self.point[2].into()),
            radius: self.radius.into(),
            strength: self.strength.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Snapshot(SnapshotMsg),
    Command(CommandMsg),
    Event(SimEvent),
    ViewerInput(ViewerInputMsg),
    Control(ControlMsg),
}

impl Message {
    pub fn msg_type(&self) -> u8 {
        match self {
            Message::Snapshot(_) => MSG_SNAPSHOT,
            Message::Command(_) => MSG_COMMAND,
            Message::Event(_) => MSG_EVENT,
            Message::ViewerInput(_) => MSG_VIEWER_INPUT,
            Message::Control(_) => MSG_CONTROL,
        }
    }

    pub fn to_frame(&self) -> Frame {
        let payload = match self {
            Message::Snapshot(s) => s.encode_payload(),
            Message::Command(c) => serde_json::to_vec(c).expect("command serializes"),
            Message::Event(e) => serde_json::to_vec(e).expect("event serializes"),
            Message::ViewerInput(v) => v.encode_payload(),
            Message::Control(c) => serde_json::to_vec(c).expect("control serializes"),
        };
        Frame::new(self.msg_type(), payload)
    }

    pub fn encode(&self) -> Vec<u8> {
        self.to_frame().encode()
    }

    /// Parses a frame; `Ok(None)` for a message type this version does not know.
    pub fn from_frame(frame: &Frame) -> Result<Option<Self>, WireError> {
        let p = &frame.payload;
        Ok(Some(match frame.msg_type {
            MSG_SNAPSHOT => Message::Snapshot(SnapshotMsg::decode_payload(p)?),
            MSG_COMMAND => Message::Command(serde_json::from_slice(p)?),
            MSG_EVENT => Message::Event(serde_json::from_slice(p)?),
            MSG_VIEWER_INPUT => Message::ViewerInput(ViewerInputMsg::decode_payload(p)?),
            MSG_CONTROL => Message::Control(serde_json::from_slice(p)?),
            other => {
                log::debug!("skipping frame of unknown type {other:#04x}");
                return Ok(None);
            }
        }))
    }
}
