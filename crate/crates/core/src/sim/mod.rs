//! Fixed-step main loop over heterogeneous agent-type groups.

mod command;
mod config;
mod group;
mod layout;
mod unicycle;
mod viewer;
mod world;

pub use command::{Command, CommandBody, EventKind, SimEvent};
pub use config::{
    AlgorithmConfig, CircleStrategyConfig, CollisionSection, NetConfig, SimConfig, SimSection,
    TypeConfig,
};
pub use group::{AgentTypeGroup, GroupModel, GroupSpec, QuadGroup, QuadMode, QuadSetup, UnicycleGroup};
pub use layout::{CircleLayout, CircleSlot, Layout};
pub use unicycle::{unicycle_step, UnicycleCmd, UnicycleParams};
pub use viewer::{viewer_input_apply, InfluenceMode, Overlay, OverlayAction, ViewerInfluence};
pub use world::{CollisionMode, SnapshotSink, TickOutcome, World};

use thiserror::Error;

use crate::collision::CollisionError;
use crate::dynamics::DynamicsError;
use crate::state::{AgentTypeId, StateError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("agent type {0:?} appears more than once")]
    DuplicateType(AgentTypeId),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Collision(#[from] CollisionError),
    #[error("failed to start collision detector: {0}")]
    Spawn(#[from] std::io::Error),
}
