//! Socket protocol between the central simulation, algorithm clients and viewers.
//!
//! Every message travels in a length-prefixed [`Frame`]. Layouts are
//! documented byte-for-byte in `PROTOCOL.md` at the repository root.

pub mod client;
pub mod frame;
pub mod messages;
pub mod queue;
pub mod server;
pub mod snapshot;
pub mod strategy;

pub use client::{AlgoClient, ClientError, Connection, RetryPolicy, RunSummary};
pub use frame::{decode_frame, encode_frame, Decoded, Frame, FrameDecoder, HEADER_LEN, MAX_FRAME_LEN};
pub use messages::{CommandEntry, CommandLevel, CommandMsg, ControlMsg, Message, ViewerInputMsg};
pub use queue::ClientQueue;
pub use server::{apply_inbound, ClientId, Hub, HubAddrs, HubConfig, HubSink, HubStats, Inbound, Role};
pub use snapshot::{encode_world_payload, SnapshotMsg, SnapshotSection};
pub use strategy::{circle_swarm_strategy, CircleStrategy};

pub const MSG_SNAPSHOT: u8 = 0x01;
pub const MSG_COMMAND: u8 = 0x02;
pub const MSG_EVENT: u8 = 0x03;
pub const MSG_VIEWER_INPUT: u8 = 0x04;
pub const MSG_CONTROL: u8 = 0x05;

/// Carried in the `hello` control message.
pub const PROTOCOL_VERSION: u8 = 1;

pub const DEFAULT_ALGO_PORT: u16 = 9001;
pub const DEFAULT_VIEWER_PORT: u16 = 9002;
pub const DEFAULT_WS_PORT: u16 = 9003;

/// Snapshots a client may have queued before older ones are dropped.
pub const CLIENT_QUEUE_CAP: usize = 4;

#[derive(Debug, thiserror::Error)]
pub enum WireError {
    #[error("frame length 0 leaves no room for the type byte")]
    EmptyFrame,
    #[error("frame length {0} exceeds the 64 MiB limit")]
    FrameTooLarge(usize),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("bad JSON payload: {0}")]
    Json(#[from] serde_json::Error),
    #[error("level {level} takes {expected} values, got {found}")]
    Arity { level: &'static str, expected: usize, found: usize },
    #[error("unknown viewer input mode {0}")]
    UnknownMode(u8),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
