//! Data-oriented batched simulation of large robot swarms.

pub mod dynamics;
pub mod exec;
pub mod state;
pub mod control;
pub mod collision;
pub mod mailbox;
pub mod sim;
