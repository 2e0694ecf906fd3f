use serde::{Deserialize, Serialize};

use super::UnicycleCmd;
use crate::control::{PosSetpoint, RateSetpoint};
use crate::state::AgentId;

/// Command payload at one of the supported levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CommandBody {
    /// Quadrotor position, feed-forward velocity and yaw.
    Position(PosSetpoint),
    /// Quadrotor body rates and collective thrust.
    Rate(RateSetpoint),
    /// Quadrotor raw motor speeds, RPM.
    Motor([f64; 4]),
    /// Ground vehicle speed and turn rate.
    Unicycle(UnicycleCmd),
}

impl CommandBody {
    pub fn is_finite(&self) -> bool {
        match self {
            CommandBody::Position(p) => p.is_finite(),
            CommandBody::Rate(r) => r.omega_sp.is_finite() && r.f_c_sp.is_finite() && r.f_c_sp >= 0.0,
            CommandBody::Motor(m) => m.iter().all(|v| v.is_finite()),
            CommandBody::Unicycle(u) => u.v.is_finite() && u.omega.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Command {
    pub agent_id: AgentId,
    pub body: CommandBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    CollisionDeath,
    FaultDeath,
    AgentCommandRejected,
}

/// Something the main loop applied or refused.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimEvent {
    pub tick: u64,
    pub kind: EventKind,
    pub agent_ids: Vec<AgentId>,
}
