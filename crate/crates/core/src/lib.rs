//! Multi-vehicle route planning for autonomous underwater vehicles working in
//! a time-invariant current field.

pub mod coordination;
pub mod geometry;
pub mod giant_route;
pub mod mission_sim;
pub mod ocean_field;
pub mod pre_planner;
pub mod render;
pub mod route_optimizer;
pub mod scenario;
pub mod seeding;
pub mod transit;

pub use geometry::{Circle, Point, Region};
pub use giant_route::{CostMatrix, GiantRoute};
pub use ocean_field::{CurrentField, LambVortex, Perturbation};
pub use pre_planner::{Allocation, FleetPlan};
pub use route_optimizer::{NoiseModel, PlannerParams, Route};
pub use scenario::{Node, Scenario, ScenarioConfig, ScenarioError};
