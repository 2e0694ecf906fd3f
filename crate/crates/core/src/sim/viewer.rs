//! Human steering from the viewer side.

use serde::{Deserialize, Serialize};

use crate::state::{AgentId, Vec3, WorldSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfluenceMode {
    Attract,
    Repel,
    Waypoint,
}

/// A mouse influence centered on a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViewerInfluence {
    pub mode: InfluenceMode,
    pub point: Vec3,
    /// m
    pub radius: f64,
    /// m/s at the center
    pub strength: f64,
}

impl ViewerInfluence {
    pub fn is_valid(&self) -> bool {
        self.point.is_finite()
            && self.radius.is_finite()
            && self.strength.is_finite()
            && self.radius >= 0.0
            && self.strength >= 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OverlayAction {
    /// Added to the agent's feed-forward velocity.
    VelocityOffset(Vec3),
    /// Replaces the agent's target position.
    Retarget(Vec3),
}

/// One-tick modification of agents' position setpoints.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overlay {
    pub entries: Vec<(AgentId, OverlayAction)>,
}

impl Overlay {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Computes the overlay an influence produces on the live agents of `world`.
///
/// Attract and repel give `±strength·(1 − d/radius)` along the direction to
/// the point for agents closer than `radius`; an agent exactly at the point
/// gets no offset. Waypoint retargets those agents to the point.
pub fn viewer_input_apply(influence: &ViewerInfluence, world: &WorldSnapshot) -> Overlay {
    let mut overlay = Overlay::default();
    if !influence.is_valid() || influence.radius == 0.0 {
        return overlay;
    }
    for s in &world.sections {
        for i in 0..s.len() {
            if !s.alive()[i] {
                continue;
            }
            let to_point = influence.point - s.pos()[i];
            let d = to_point.norm();
            if d >= influence.radius {
                continue;
            }
            let action = match influence.mode {
                InfluenceMode::Waypoint => OverlayAction::Retarget(influence.point),
                mode => {
                    let dir = if d > 1e-9 { to_point / d } else { Vec3::ZERO };
                    let sign = if mode == InfluenceMode::Attract { 1.0 } else { -1.0 };
                    OverlayAction::VelocityOffset(dir * (sign * influence.strength * (1.0 - d / influence.radius)))
                }
            };
            overlay.entries.push((s.ids()[i], action));
        }
    }
    overlay
}
