//! Initial placement of agents.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::state::{InitialPose, UnitQuat, Vec3};

/// Concentric circles about the origin.
///
/// Agent `k` goes to ring `k / per_ring` at phase `2π·(k mod per_ring)/per_ring`.
/// Successive rings step outward by `radius_step` and upward by `z_step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleLayout {
    pub radius: f64,
    pub per_ring: usize,
    pub z: f64,
    pub z_step: f64,
    pub radius_step: f64,
}

impl Default for CircleLayout {
    fn default() -> Self {
        CircleLayout { radius: 5.0, per_ring: 10, z: 2.0, z_step: 1.0, radius_step: 0.0 }
    }
}

/// Circle assignment of one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleSlot {
    pub radius: f64,
    pub phase: f64,
    pub z: f64,
}

impl CircleLayout {
    pub fn slot(&self, k: usize) -> CircleSlot {
        let per = self.per_ring.max(1);
        let ring = (k / per) as f64;
        CircleSlot {
            radius: self.radius + ring * self.radius_step,
            phase: TAU * (k % per) as f64 / per as f64,
            z: self.z + ring * self.z_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Layout {
    /// Rows of `columns` agents in the XY plane.
    Grid {
        #[serde(default = "default_spacing")]
        spacing: f64,
        #[serde(default)]
        columns: Option<usize>,
        #[serde(default)]
        origin: [f64; 3],
    },
    /// Phase-zero points of a [`CircleLayout`], heading along the circle.
    Circle(CircleLayout),
    /// Explicit positions; the count must match.
    Points { points: Vec<[f64; 3]> },
}

fn default_spacing() -> f64 {
    1.0
}

impl Default for Layout {
    fn default() -> Self {
        Layout::Grid { spacing: default_spacing(), columns: None, origin: [0.0, 0.0, 0.0] }
    }
}

impl Layout {
    pub fn poses(&self, count: usize) -> Result<Vec<InitialPose>, SimError> {
        match self {
            Layout::Grid { spacing, columns, origin } => {
                if !(spacing.is_finite() && *spacing > 0.0) {
                    return Err(SimError::Config(format!("grid spacing must be positive, got {spacing}")));
                }
                let cols = columns.unwrap_or_else(|| (count as f64).sqrt().ceil().max(1.0) as usize).max(1);
                let o = Vec3::from_array(*origin);
                Ok((0..count)
                    .map(|k| {
                        let (r, c) = (k / cols, k % cols);
                        InitialPose::at(o + Vec3::new(c as f64 * spacing, r as f64 * spacing, 0.0))
                    })
                    .collect())
            }
            Layout::Circle(c) => Ok((0..count)
                .map(|k| {
                    let s = c.slot(k);
                    let (sn, cs) = s.phase.sin_cos();
                    InitialPose::at(Vec3::new(s.radius * cs, s.radius * sn, s.z))
                        .with_quat(UnitQuat::from_yaw(s.phase + FRAC_PI_2))
                })
                .collect()),
            Layout::Points { points } => {
                if points.len() != count {
                    return Err(SimError::Config(format!(
                        "layout lists {} points but count is {count}",
                        points.len()
                    )));
                }
                Ok(points.iter().map(|p| InitialPose::at(Vec3::from_array(*p))).collect())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rows() {
        let poses = Layout::Grid { spacing: 2.0, columns: Some(3), origin: [0.0, 0.0, 1.0] }.poses(5).unwrap();
        assert_eq!(poses[4].pos, Vec3::new(2.0, 2.0, 1.0));
    }

    #[test]
    fn circle_slots_are_distinct() {
        let c = CircleLayout { per_ring: 4, ..Default::default() };
        let s5 = c.slot(5);
        assert_eq!(s5.z, c.z + c.z_step);
        assert!((s5.phase - FRAC_PI_2).abs() < 1e-15);
        let poses = Layout::Circle(c).poses(8).unwrap();
        assert!((poses[0].pos - Vec3::new(5.0, 0.0, 2.0)).norm() < 1e-12);
    }

    #[test]
    fn points_count_mismatch() {
        assert!(Layout::Points { points: vec![[0.0; 3]] }.poses(2).is_err());
    }
}
