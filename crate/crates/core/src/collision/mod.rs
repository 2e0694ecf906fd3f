//! Sphere collision and neighbor detection over state snapshots.

mod detector;
mod grid;

pub use detector::{run_detector, DetectorHandle, DetectorOutput};
pub use grid::{detect, hash_cell, CellKey, CollisionConfig, CollisionReport};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CollisionError {
    #[error("collision radius {r_collide} must be positive and at most the sensing radius {r_sense}")]
    Radius { r_collide: f64, r_sense: f64 },
    #[error("grid cell {cell} must be at least {min} (twice the largest radius)")]
    Cell { cell: f64, min: f64 },
}
