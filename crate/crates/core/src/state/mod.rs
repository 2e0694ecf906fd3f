//! Math types and the columnar all-states table.

mod batch;
mod math;

pub use batch::{
    AgentBatch, AgentId, AgentRow, AgentTypeId, BatchSnapshot, InitialPose, SimClock,
    WorldSnapshot,
};
pub use math::{quat_mul, quat_rotate, Quat, UnitQuat, Vec3, UNIT_INPUT_TOL};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("quaternion norm {norm} is not unit")]
    NotUnit { norm: f64 },
    #[error("zero quaternion")]
    ZeroQuaternion,
    #[error("a batch needs at least one agent")]
    EmptyBatch,
    #[error("duplicate agent id {0}")]
    DuplicateId(AgentId),
    #[error("column length {found} does not match batch size {expected}")]
    ColumnLength { expected: usize, found: usize },
    #[error("cannot allocate {rows} rows")]
    OutOfMemory { rows: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
}
