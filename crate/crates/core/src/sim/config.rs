//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentTypeGroup, CircleLayout, CollisionMode, GroupSpec, Layout, QuadSetup, SimError, UnicycleParams, World};
use crate::collision::CollisionConfig;
use crate::control::{ControlLimits, OuterGains, PidGains};
use crate::dynamics::QuadParams;
use crate::exec::Parallelism;
use crate::state::{AgentBatch, AgentTypeId};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default)]
    pub sim: SimSection,
    /// Agent types keyed by their numeric type id.
    #[serde(default)]
    pub types: BTreeMap<String, TypeConfig>,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub collision: CollisionSection,
    #[serde(default)]
    pub algorithm: AlgorithmConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    /// s
    pub dt: f64,
    /// Ticks to run; 0 runs until stopped.
    pub tick_limit: u64,
    /// Simulated seconds per wall second; 0 runs as fast as possible.
    pub realtime_factor: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection { dt: 0.01, tick_limit: 0, realtime_factor: 0.0 }
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TypeConfig {
    Quadrotor {
        count: usize,
        #[serde(default)]
        layout: Layout,
        #[serde(default)]
        params: QuadParams,
        #[serde(default)]
        gains: PidGains,
        #[serde(default)]
        outer: OuterGains,
        /// Defaults are derived from `params`.
        #[serde(default)]
        limits: Option<ControlLimits>,
    },
    Unicycle {
        count: usize,
        #[serde(default)]
        layout: Layout,
        #[serde(default)]
        params: UnicycleParams,
    },
}

impl TypeConfig {
    pub fn count(&self) -> usize {
        match self {
            TypeConfig::Quadrotor { count, .. } | TypeConfig::Unicycle { count, .. } => *count,
        }
    }

    pub fn layout(&self) -> &Layout {
        match self {
            TypeConfig::Quadrotor { layout, .. } | TypeConfig::Unicycle { layout, .. } => layout,
        }
    }

    pub fn spec(&self) -> GroupSpec {
        match self {
            TypeConfig::Quadrotor { params, gains, outer, limits, .. } => GroupSpec::Quadrotor(QuadSetup {
                params: *params,
                rate_gains: *gains,
                outer_gains: *outer,
                limits: limits.unwrap_or_else(|| ControlLimits::for_params(params)),
            }),
            TypeConfig::Unicycle { params, .. } => GroupSpec::Unicycle(*params),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    pub enabled: bool,
    pub bind: String,
    pub algo_port: u16,
    pub viewer_port: u16,
    /// WebSocket binding of the viewer stream; 0 disables it.
    pub ws_port: u16,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            enabled: true,
            bind: "127.0.0.1".into(),
            algo_port: 9001,
            viewer_port: 9002,
            ws_port: 9003,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollisionSection {
    pub enabled: bool,
    /// Run detection inside the loop instead of on its own thread.
    pub in_loop: bool,
    pub default_radius: f64,
    /// Per-type radius keyed by type id.
    pub radii: BTreeMap<String, f64>,
    pub r_sense: f64,
    pub cell: f64,
}

impl Default for CollisionSection {
    fn default() -> Self {
        let c = CollisionConfig::default();
        CollisionSection {
            enabled: false,
            in_loop: false,
            default_radius: c.default_radius,
            radii: BTreeMap::new(),
            r_sense: c.r_sense,
            cell: c.cell,
        }
    }
}

impl CollisionSection {
    pub fn mode(&self) -> CollisionMode {
        match (self.enabled, self.in_loop) {
            (false, _) => CollisionMode::Off,
            (true, true) => CollisionMode::InLoop,
            (true, false) => CollisionMode::OutOfLoop,
        }
    }

    pub fn to_config(&self) -> Result<CollisionConfig, SimError> {
        let mut radii = BTreeMap::new();
        for (k, r) in &self.radii {
            radii.insert(parse_type_id(k)?.0, *r);
        }
        let c = CollisionConfig { default_radius: self.default_radius, radii, r_sense: self.r_sense, cell: self.cell };
        c.validate()?;
        Ok(c)
    }
}

/// Built-in algorithm run by the central side itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgorithmConfig {
    /// Run `strategy` inside the main loop instead of waiting for a remote client.
    pub in_loop: bool,
    /// `"none"` or `"circle"`.
    pub strategy: String,
    pub circle: CircleStrategyConfig,
}

impl Default for AlgorithmConfig {
    fn default() -> Self {
        AlgorithmConfig { in_loop: false, strategy: "none".into(), circle: CircleStrategyConfig::default() }
    }
}

/// Circle-swarm demo: each agent of `type_id` flies its slot of `layout`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CircleStrategyConfig {
    pub type_id: u16,
    /// rad/s
    pub omega: f64,
    pub layout: CircleLayout,
}

impl Default for CircleStrategyConfig {
    fn default() -> Self {
        CircleStrategyConfig { type_id: 0, omega: 0.3, layout: CircleLayout::default() }
    }
}

fn parse_type_id(key: &str) -> Result<AgentTypeId, SimError> {
    key.parse::<u16>()
        .map(AgentTypeId)
        .map_err(|_| SimError::Config(format!("type key {key:?} is not an integer in 0..=65535")))
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.sim.dt.is_finite() && self.sim.dt > 0.0) {
            return Err(SimError::Config(format!("dt must be positive, got {}", self.sim.dt)));
        }
        if !(self.sim.realtime_factor.is_finite() && self.sim.realtime_factor >= 0.0) {
            return Err(SimError::Config(format!(
                "realtime_factor must be non-negative, got {}",
                self.sim.realtime_factor
            )));
        }
        for key in self.types.keys() {
            parse_type_id(key)?;
        }
        if !matches!(self.algorithm.strategy.as_str(), "none" | "circle") {
            return Err(SimError::Config(format!("unknown strategy {:?}", self.algorithm.strategy)));
        }
        if self.collision.enabled {
            self.collision.to_config()?;
        }
        Ok(())
    }

    /// Type ids in ascending order with their configs.
    pub fn types_by_id(&self) -> Result<Vec<(AgentTypeId, &TypeConfig)>, SimError> {
        let mut v = self
            .types
            .iter()
            .map(|(k, t)| parse_type_id(k).map(|id| (id, t)))
            .collect::<Result<Vec<_>, _>>()?;
        v.sort_by_key(|(id, _)| *id);
        Ok(v)
    }

    /// Builds the world. Agent ids are assigned consecutively across types in
    /// ascending type order, starting at 0.
    pub fn build_world(&self, par: Parallelism) -> Result<World, SimError> {
        let mut groups = Vec::new();
        let mut next_id = 0u64;
        for (ty, t) in self.types_by_id()? {
            let poses = t.layout().poses(t.count())?;
            let batch = if poses.is_empty() {
                AgentBatch::empty(ty)
            } else {
                AgentBatch::create(ty, &poses, next_id)?
            };
            next_id += poses.len() as u64;
            groups.push(AgentTypeGroup::new(batch, t.spec())?);
        }
        let mut world = World::new(self.sim.dt, groups, par)?;
        if self.collision.enabled {
            world.set_collision(self.collision.to_config()?, self.collision.mode())?;
        }
        Ok(world)
    }
}
