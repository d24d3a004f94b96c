//! Mission world: sensor nodes, region, obstacles and the believed current field.
//!
//! Node ids run `1..=n` so that a node's id is also its row in the cost matrix;
//! row `0` is the start point and row `n + 1` the recovery point.

use crate::geometry::{Circle, Point, Region};
use crate::ocean_field::{CurrentField, LambVortex};
use crate::seeding::rng_from_seed;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("invalid field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("parse error at `{field}`: {message}")]
    Parse { field: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ScenarioError {
    fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Name of the offending field for parse and validation errors.
    pub fn field(&self) -> Option<&str> {
        match self {
            Self::Invalid { field, .. } | Self::Parse { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// Normalised data amount, in (0, 1].
    pub rho: f64,
}

impl Node {
    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub region: Region,
    pub start: Point,
    pub end: Point,
    pub nodes: Vec<Node>,
    pub obstacles: Vec<Circle>,
    pub vortexes: Vec<LambVortex>,
    /// Fixed communication delay per node visit, s.
    pub t0: f64,
    /// Collection time per unit of data amount, s.
    pub service_coeff: f64,
}

impl Scenario {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Index of the recovery point in cost-matrix numbering.
    pub fn end_index(&self) -> usize {
        self.nodes.len() + 1
    }

    /// Sensor node by id (1-based).
    pub fn node(&self, id: usize) -> Option<&Node> {
        id.checked_sub(1).and_then(|i| self.nodes.get(i))
    }

    /// Position of any matrix index: start, sensor node or end.
    pub fn position(&self, index: usize) -> Point {
        if index == 0 {
            self.start
        } else if index == self.end_index() {
            self.end
        } else {
            self.nodes[index - 1].position()
        }
    }

    /// Data amount at a matrix index (zero for start and end).
    pub fn rho(&self, index: usize) -> f64 {
        self.node(index).map_or(0.0, |n| n.rho)
    }

    pub fn total_rho(&self) -> f64 {
        self.nodes.iter().map(|n| n.rho).sum()
    }

    pub fn field(&self) -> CurrentField {
        CurrentField::new(self.vortexes.clone())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !self.region.is_valid() {
            return Err(ScenarioError::invalid("region", "region must have positive extent"));
        }
        if self.nodes.is_empty() {
            return Err(ScenarioError::invalid("nodes", "at least one node is required"));
        }
        if !self.start.is_finite() {
            return Err(ScenarioError::invalid("start", "non-finite coordinates"));
        }
        if !self.end.is_finite() {
            return Err(ScenarioError::invalid("end", "non-finite coordinates"));
        }
        if self.start == self.end {
            return Err(ScenarioError::invalid("end", "start and end must differ"));
        }
        for (i, node) in self.nodes.iter().enumerate() {
            let field = |name: &str| format!("nodes[{i}].{name}");
            if node.id != i + 1 {
                return Err(ScenarioError::invalid(
                    field("id"),
                    format!("expected id {} (ids are contiguous from 1), got {}", i + 1, node.id),
                ));
            }
            if !(node.rho > 0.0 && node.rho <= 1.0) {
                return Err(ScenarioError::invalid(
                    field("rho"),
                    format!("data amount {} outside (0, 1]", node.rho),
                ));
            }
            if !node.position().is_finite() || !self.region.contains(node.position()) {
                return Err(ScenarioError::invalid(field("x"), "node lies outside the region"));
            }
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.r > 0.0 && o.r.is_finite()) || !o.center().is_finite() {
                return Err(ScenarioError::invalid(format!("obstacles[{i}].r"), "radius must be positive"));
            }
            if o.contains(self.start) {
                return Err(ScenarioError::invalid(format!("obstacles[{i}]"), "obstacle covers the start"));
            }
            if o.contains(self.end) {
                return Err(ScenarioError::invalid(format!("obstacles[{i}]"), "obstacle covers the end"));
            }
        }
        for (i, v) in self.vortexes.iter().enumerate() {
            if !v.is_valid() {
                return Err(ScenarioError::invalid(
                    format!("vortexes[{i}].delta"),
                    "vortex needs a positive radius and finite strength",
                ));
            }
        }
        if !(self.t0 >= 0.0 && self.t0.is_finite()) {
            return Err(ScenarioError::invalid("t0", "communication delay must be non-negative"));
        }
        if !(self.service_coeff >= 0.0 && self.service_coeff.is_finite()) {
            return Err(ScenarioError::invalid("service_coeff", "must be non-negative"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|err| {
            let path = err.path().to_string();
            let message = err.inner().to_string();
            let field = missing_field_name(&message)
                .map(|name| if path == "." { name.to_string() } else { format!("{path}.{name}") })
                .unwrap_or(path);
            ScenarioError::Parse { field, message }
        })?;
        scenario.validate()?;
        Ok(scenario)
    }
}

fn missing_field_name(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}

/// Collection time at a node: `t0 + service_coeff · ρ`.
pub fn service_time(node: &Node, scenario: &Scenario) -> f64 {
    scenario.t0 + scenario.service_coeff * node.rho
}

pub fn persist_scenario(scenario: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, scenario.to_json()).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Side of the square region, m.
    pub region_size: f64,
    pub node_count: usize,
    /// Nodes are kept at least this far from the region boundary, m.
    pub node_margin: f64,
    pub vortex_count: usize,
    pub gamma_mean: f64,
    pub gamma_std: f64,
    pub delta_mean: f64,
    pub delta_std: f64,
    pub obstacle_count: usize,
    pub obstacle_radius_min: f64,
    pub obstacle_radius_max: f64,
    pub t0: f64,
    pub service_coeff: f64,
    /// Start point; at 30% of the width on the horizontal midline when absent.
    pub start: Option<Point>,
    /// Recovery point; at 70% of the width on the horizontal midline when absent.
    pub end: Option<Point>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            region_size: 10_000.0,
            node_count: 60,
            node_margin: 1000.0,
            vortex_count: 20,
            gamma_mean: 0.0,
            gamma_std: 50.0,
            delta_mean: 80.0,
            delta_std: 100.0,
            obstacle_count: 10,
            obstacle_radius_min: 100.0,
            obstacle_radius_max: 300.0,
            t0: 5.0,
            service_coeff: 20.0,
            start: None,
            end: None,
            seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Vortex radii are clamped to at least this many meters.
pub const MIN_VORTEX_RADIUS: f64 = 1.0;
/// Free water kept between an obstacle edge and any node, start or end.
const OBSTACLE_CLEARANCE: f64 = 10.0;
const OBSTACLE_ATTEMPTS: usize = 1000;

/// Builds a random instance. Equal configs (including the seed) give equal scenarios.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    if config.node_count == 0 {
        return Err(ScenarioError::Config("node_count must be at least 1".into()));
    }
    if !(config.region_size > 0.0 && config.region_size.is_finite()) {
        return Err(ScenarioError::Config("region_size must be positive".into()));
    }
    if config.gamma_std < 0.0 || config.delta_std < 0.0 {
        return Err(ScenarioError::Config("standard deviations must be non-negative".into()));
    }
    if !(config.obstacle_radius_min > 0.0 && config.obstacle_radius_min <= config.obstacle_radius_max) {
        return Err(ScenarioError::Config("obstacle radius range is empty".into()));
    }
    let size = config.region_size;
    let margin = config.node_margin;
    if !(margin >= 0.0 && 2.0 * margin < size) {
        return Err(ScenarioError::Config("node_margin must leave room for nodes".into()));
    }
    let region = Region::square(size);
    let start = config.start.unwrap_or(Point::new(0.3 * size, 0.5 * size));
    let end = config.end.unwrap_or(Point::new(0.7 * size, 0.5 * size));
    if !region.contains(start) || !region.contains(end) || start == end {
        return Err(ScenarioError::Config("start and end must be distinct points in the region".into()));
    }

    let mut rng = rng_from_seed(config.seed);
    let nodes: Vec<Node> = (0..config.node_count)
        .map(|i| {
            let x = rng.random_range(margin..=size - margin);
            let y = rng.random_range(margin..=size - margin);
            // (0, 1]
            let rho = 1.0 - rng.random::<f64>();
            Node { id: i + 1, x, y, rho }
        })
        .collect();

    let gamma = Normal::new(config.gamma_mean, config.gamma_std)
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    let delta = Normal::new(config.delta_mean, config.delta_std)
        .map_err(|e| ScenarioError::Config(e.to_string()))?;
    let vortexes = (0..config.vortex_count)
        .map(|_| {
            let c = Point::new(rng.random_range(0.0..=size), rng.random_range(0.0..=size));
            let g = gamma.sample(&mut rng);
            let d = delta.sample(&mut rng).max(MIN_VORTEX_RADIUS);
            LambVortex::new(c, g, d)
        })
        .collect();

    let mut obstacles: Vec<Circle> = Vec::with_capacity(config.obstacle_count);
    for _ in 0..config.obstacle_count {
        for _ in 0..OBSTACLE_ATTEMPTS {
            let c = Circle {
                x: rng.random_range(0.0..=size),
                y: rng.random_range(0.0..=size),
                r: rng.random_range(config.obstacle_radius_min..=config.obstacle_radius_max),
            };
            let reach = c.r + OBSTACLE_CLEARANCE;
            let blocks = |p: Point| c.center().distance(p) <= reach;
            if blocks(start) || blocks(end) || nodes.iter().any(|n| blocks(n.position())) {
                continue;
            }
            obstacles.push(c);
            break;
        }
    }

    let scenario = Scenario {
        region,
        start,
        end,
        nodes,
        obstacles,
        vortexes,
        t0: config.t0,
        service_coeff: config.service_coeff,
    };
    scenario.validate()?;
    Ok(scenario)
}
