//! Event-driven execution of a fleet plan under stochastic travel times.
//!
//! Vehicles advance leg by leg. At every checkpoint a vehicle compares its
//! expected remaining time with the budget it has left and drops its least
//! efficient nodes when the two no longer fit. Dropped and never-planned nodes
//! form the idle pool, which an auction hands out to vehicles with slack when
//! coordination is on.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::coordination::{run_auction, AgentView, AuctionEvent, Valuation};
use crate::giant_route::{build_cost_matrix, CostMatrix};
use crate::ocean_field::{realize_true_field, CurrentField, Perturbation};
use crate::pre_planner::{FleetPlan, PrePlanError};
use crate::route_optimizer::{best_insertion, drop_least_efficient, preplan_fleet, sample_leg_time, NoiseModel, PlannerParams};
use crate::scenario::Scenario;
use crate::seeding::{derive_seed, derive_seed2, rng_from_seed, stream};
use crate::transit::{path_time, plan_path, PathNetwork, PathPlannerParams, PlanError};

/// Whether the expected remaining route of `agent` overruns its budget.
pub fn check_time_violation(agent: &AgentView, matrix: &CostMatrix) -> bool {
    matrix.route_time_from(agent.position, &agent.route) > agent.tmax - agent.elapsed
}

/// Extra time kept in hand on top of the expected remaining route.
///
/// Covers the next leg and the leg from there to the end point: the mean
/// maneuver time, a fixed fraction for field mismatch, and `z` standard
/// deviations of the travel-time noise. Later legs are covered by later
/// checkpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyMargin {
    pub z: f64,
    /// Fraction of nominal leg time added for believed/true field mismatch.
    /// Only applied when legs are timed through a realized field.
    pub model_frac: f64,
}

impl SafetyMargin {
    pub const NONE: SafetyMargin = SafetyMargin { z: 0.0, model_frac: 0.0 };
}

impl Default for SafetyMargin {
    fn default() -> Self {
        Self { z: 4.0, model_frac: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Checkpoints {
    /// Check on every node arrival.
    Arrival,
    /// Also check vehicles in transit every `interval` seconds.
    Periodic { interval: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionOptions {
    pub coordination: bool,
    pub checkpoints: Checkpoints,
    pub tmax: f64,
    pub prop_speed: f64,
    pub noise: NoiseModel,
    pub safety: SafetyMargin,
    /// Minimum bid increment as a fraction of the largest ψ on offer.
    pub epsilon_frac: f64,
}

impl Default for MissionOptions {
    fn default() -> Self {
        Self {
            coordination: true,
            checkpoints: Checkpoints::Arrival,
            tmax: 18_000.0,
            prop_speed: 1.0,
            noise: NoiseModel::default(),
            safety: SafetyMargin::default(),
            epsilon_frac: 1e-3,
        }
    }
}

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Plan(#[from] PrePlanError),
    #[error(transparent)]
    Path(#[from] PlanError),
}

/// Scenario plus the expected costs vehicles plan with, and, in path-aware
/// mode, the paths they follow.
#[derive(Debug, Clone)]
pub struct MissionContext {
    pub scenario: Scenario,
    pub believed: CostMatrix,
    pub network: Option<PathNetwork>,
    pub path_params: PathPlannerParams,
    pub prop_speed: f64,
}

impl MissionContext {
    /// Straight-line legs; the realized field is ignored.
    pub fn matrix_mode(scenario: &Scenario, prop_speed: f64) -> Self {
        Self {
            scenario: scenario.clone(),
            believed: build_cost_matrix(scenario, prop_speed),
            network: None,
            path_params: PathPlannerParams::default(),
            prop_speed,
        }
    }

    /// Legs follow paths planned through the believed field and are timed
    /// through the realized one.
    pub fn path_aware(scenario: &Scenario, prop_speed: f64, params: &PathPlannerParams, seed: u64) -> Result<Self, PlanError> {
        let field = scenario.field();
        let network = PathNetwork::build(scenario, &field, params, prop_speed, seed)?;
        let believed = network.cost_matrix(scenario, &field, prop_speed);
        Ok(Self {
            scenario: scenario.clone(),
            believed,
            network: Some(network),
            path_params: params.clone(),
            prop_speed,
        })
    }

    pub fn is_path_aware(&self) -> bool {
        self.network.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Depart,
    Arrive,
    Collect,
    Discard,
    Bid,
    Award,
    Reject,
    Finish,
    Strand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionEvent {
    pub time: f64,
    pub vehicle: usize,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    /// Bid amount for bids and awards, data amount for collections.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleSummary {
    pub vehicle: usize,
    pub finish_time: f64,
    pub collected: Vec<usize>,
    pub discards: usize,
    pub pickups: usize,
    pub stranded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    /// Digest of the scenario JSON.
    pub scenario: String,
    pub seed: u64,
    pub options: MissionOptions,
    pub path_aware: bool,
    pub events: Vec<MissionEvent>,
    pub vehicles: Vec<VehicleSummary>,
    pub theta: f64,
    pub j: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum LogLine {
    Header {
        scenario: String,
        seed: u64,
        path_aware: bool,
        options: MissionOptions,
    },
    Event(MissionEvent),
    Vehicle(VehicleSummary),
    Summary { theta: f64, j: f64 },
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("log is missing its {0} line")]
    Missing(&'static str),
}

impl MissionLog {
    pub fn discards(&self) -> usize {
        self.vehicles.iter().map(|v| v.discards).sum()
    }

    pub fn pickups(&self) -> usize {
        self.vehicles.iter().map(|v| v.pickups).sum()
    }

    pub fn strands(&self) -> usize {
        self.events.iter().filter(|e| e.kind == EventKind::Strand).count()
    }

    /// Latest vehicle finish time, s.
    pub fn makespan(&self) -> f64 {
        self.vehicles.iter().map(|v| v.finish_time).fold(0.0, f64::max)
    }

    /// One JSON object per line: header, events, vehicle totals, summary.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: &LogLine| {
            out.push_str(&serde_json::to_string(line).expect("log line serializes"));
            out.push('\n');
        };
        push(&LogLine::Header {
            scenario: self.scenario.clone(),
            seed: self.seed,
            path_aware: self.path_aware,
            options: self.options.clone(),
        });
        for e in &self.events {
            push(&LogLine::Event(e.clone()));
        }
        for v in &self.vehicles {
            push(&LogLine::Vehicle(v.clone()));
        }
        push(&LogLine::Summary { theta: self.theta, j: self.j });
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut header = None;
        let mut summary = None;
        let mut events = Vec::new();
        let mut vehicles = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let parsed: LogLine = serde_json::from_str(line).map_err(|source| LogError::Parse { line: k + 1, source })?;
            match parsed {
                LogLine::Header { scenario, seed, path_aware, options } => header = Some((scenario, seed, path_aware, options)),
                LogLine::Event(e) => events.push(e),
                LogLine::Vehicle(v) => vehicles.push(v),
                LogLine::Summary { theta, j } => summary = Some((theta, j)),
            }
        }
        let (scenario, seed, path_aware, options) = header.ok_or(LogError::Missing("header"))?;
        let (theta, j) = summary.ok_or(LogError::Missing("summary"))?;
        Ok(Self {
            scenario,
            seed,
            options,
            path_aware,
            events,
            vehicles,
            theta,
            j,
        })
    }
}

/// Short hex digest of any serializable value.
pub fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes");
    let hash = Sha256::digest(&bytes);
    hash.iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Completion rate θ and collected amount J replayed from collect events.
pub fn completion_metrics(events: &[MissionEvent], scenario: &Scenario) -> (f64, f64) {
    let j: f64 = events
        .iter()
        .filter(|e| e.kind == EventKind::Collect)
        .filter_map(|e| e.node)
        .map(|n| scenario.rho(n))
        .sum();
    let total = scenario.total_rho();
    // summation order can push a full collection a rounding step above one
    let theta = if total > 0.0 { (j / total).min(1.0) } else { 1.0 };
    (theta, j)
}

struct Vehicle {
    id: usize,
    at: usize,
    /// Node currently travelled to; equals `at` while the vehicle is at a node.
    target: usize,
    route: Vec<usize>,
    /// Realized time at which `target` is reached.
    arrival: f64,
    /// Time the vehicle expects to be ready to leave `target`.
    expected_ready: f64,
    legs: u64,
    finished: bool,
    summary: VehicleSummary,
}

impl Vehicle {
    fn in_transit(&self) -> bool {
        !self.finished && self.target != self.at
    }
}

struct Sim<'a> {
    ctx: &'a MissionContext,
    true_field: &'a CurrentField,
    options: &'a MissionOptions,
    seed: u64,
    vehicles: Vec<Vehicle>,
    idle: Vec<usize>,
    events: Vec<MissionEvent>,
    replanned: HashMap<(usize, usize), f64>,
}

impl Sim<'_> {
    fn end(&self) -> usize {
        self.ctx.believed.end()
    }

    fn log(&mut self, time: f64, vehicle: usize, kind: EventKind, node: Option<usize>, payload: Option<f64>) {
        self.events.push(MissionEvent {
            time,
            vehicle,
            kind,
            node,
            payload,
        });
    }

    fn reserve(&self, position: usize, route: &[usize]) -> f64 {
        let m = &self.ctx.believed;
        let noise = &self.options.noise;
        let model = if self.ctx.is_path_aware() { self.options.safety.model_frac } else { 0.0 };
        let first = route.first().copied().unwrap_or(m.end());
        let mut legs = vec![m.transit(position, first)];
        if first != m.end() {
            legs.push(m.transit(first, m.end()));
        }
        let mut mean = 0.0;
        let mut var = 0.0;
        for t in legs {
            mean += noise.expected_maneuver_time(t) + model * t;
            var += (noise.sigma_frac * t).powi(2) + noise.maneuver_rate * t / 3600.0 * noise.maneuver_cost.powi(2);
        }
        mean + self.options.safety.z * var.sqrt()
    }

    fn violates(&self, view: &AgentView) -> bool {
        let expected = self.ctx.believed.route_time_from(view.position, &view.route);
        expected + self.reserve(view.position, &view.route) > view.tmax - view.elapsed
    }

    fn view(&self, v: usize, now: f64) -> AgentView {
        let veh = &self.vehicles[v];
        AgentView {
            vehicle: v,
            position: veh.target,
            elapsed: if veh.in_transit() { veh.expected_ready.max(now) } else { now },
            route: veh.route.clone(),
            tmax: self.options.tmax,
        }
    }

    /// Drops nodes from vehicle `v` until its remaining route fits again.
    fn checkpoint(&mut self, v: usize, now: f64) {
        let mut view = self.view(v, now);
        while !view.route.is_empty() && self.violates(&view) {
            let expected = self.ctx.believed.route_time_from(view.position, &view.route);
            let excess = expected + self.reserve(view.position, &view.route) - view.remaining_budget();
            let (kept, dropped) = drop_least_efficient(view.position, &view.route, excess.max(0.0), &self.ctx.believed);
            for node in dropped {
                self.log(now, v, EventKind::Discard, Some(node), None);
                self.vehicles[v].summary.discards += 1;
                self.idle.push(node);
            }
            view.route = kept;
        }
        if view.route.is_empty() && check_time_violation(&view, &self.ctx.believed) && !self.vehicles[v].summary.stranded {
            self.vehicles[v].summary.stranded = true;
            self.log(now, v, EventKind::Strand, None, None);
        }
        self.vehicles[v].route = view.route;
    }

    fn auction(&mut self, trigger: usize, now: f64) {
        if self.idle.is_empty() {
            return;
        }
        let end = self.end();
        let agents: Vec<usize> = (0..self.vehicles.len())
            .filter(|&v| !self.vehicles[v].finished && self.vehicles[v].target != end)
            .collect();
        if agents.is_empty() {
            return;
        }
        self.idle.sort_unstable();
        let views: Vec<AgentView> = agents.iter().map(|&v| self.view(v, now)).collect();
        let mut valuation = FleetValuation { sim: self, views };
        let max_psi = (0..agents.len())
            .flat_map(|a| self.idle.iter().map(move |&j| (a, j)))
            .map(|(a, j)| valuation.value(a, j))
            .fold(0.0, f64::max);
        if max_psi <= 0.0 {
            return;
        }
        let idle = self.idle.clone();
        let outcome = run_auction(&idle, &mut valuation, self.options.epsilon_frac * max_psi);
        let views = valuation.views;
        for e in outcome.events {
            match e {
                AuctionEvent::Bid { agent, node, amount, .. } => {
                    self.log(now, agents[agent], EventKind::Bid, Some(node), Some(amount));
                }
                AuctionEvent::Award { agent, node, amount, .. } => {
                    self.log(now, agents[agent], EventKind::Award, Some(node), Some(amount));
                    self.vehicles[agents[agent]].summary.pickups += 1;
                }
                AuctionEvent::Reject { node, .. } => self.log(now, trigger, EventKind::Reject, Some(node), None),
            }
        }
        for (a, view) in views.into_iter().enumerate() {
            self.vehicles[agents[a]].route = view.route;
        }
        self.idle = outcome.unassigned;
    }

    /// Nominal time of leg `i → j` as actually experienced.
    fn realized_nominal(&mut self, i: usize, j: usize) -> f64 {
        let Some(network) = &self.ctx.network else {
            return self.ctx.believed.transit(i, j);
        };
        let prop = self.ctx.prop_speed;
        if let Some(path) = network.path(i, j) {
            let t = path_time(path, self.true_field, prop);
            if t.feasible {
                return t.seconds;
            }
        }
        if let Some(&t) = self.replanned.get(&(i, j)) {
            return t;
        }
        // the planned track cannot be held in the realized field: replan on board
        let scenario = &self.ctx.scenario;
        let seed = derive_seed2(self.seed, stream::PATH, (i as u64) << 32 | j as u64);
        let path = match plan_path(
            scenario.position(i),
            scenario.position(j),
            self.true_field,
            &scenario.obstacles,
            &self.ctx.path_params,
            prop,
            seed,
        ) {
            Ok(p) => p,
            Err(PlanError::NoFeasiblePath { best, .. }) => best,
            Err(_) => return self.ctx.believed.transit(i, j),
        };
        let t = path_time(&path, self.true_field, prop);
        let seconds = if t.feasible { t.seconds } else { 2.0 * self.ctx.believed.transit(i, j) };
        self.replanned.insert((i, j), seconds);
        seconds
    }

    fn depart(&mut self, v: usize, now: f64) {
        let end = self.end();
        let from = self.vehicles[v].at;
        let to = if self.vehicles[v].route.is_empty() {
            end
        } else {
            self.vehicles[v].route.remove(0)
        };
        let nominal = self.realized_nominal(from, to);
        let veh = &mut self.vehicles[v];
        veh.legs += 1;
        let mut rng = rng_from_seed(derive_seed2(self.seed, v as u64, veh.legs));
        let dt = sample_leg_time(nominal, &self.options.noise, &mut rng);
        veh.target = to;
        veh.arrival = now + dt;
        veh.expected_ready = now + self.ctx.believed.transit(from, to) + self.ctx.believed.service(to);
        self.log(now, v, EventKind::Depart, Some(to), None);
    }

    /// Vehicle `v` is at a node and ready to leave at `now`.
    fn at_node(&mut self, v: usize, now: f64) {
        self.checkpoint(v, now);
        if self.options.coordination {
            self.auction(v, now);
        }
        self.depart(v, now);
    }

    fn arrive(&mut self, v: usize) {
        let end = self.end();
        let t = self.vehicles[v].arrival;
        let node = self.vehicles[v].target;
        self.vehicles[v].at = node;
        self.log(t, v, EventKind::Arrive, Some(node), None);
        if node == end {
            let veh = &mut self.vehicles[v];
            veh.finished = true;
            veh.summary.finish_time = t;
            self.log(t, v, EventKind::Finish, Some(node), None);
            if t > self.options.tmax && !self.vehicles[v].summary.stranded {
                self.vehicles[v].summary.stranded = true;
                self.log(t, v, EventKind::Strand, Some(node), None);
            }
            return;
        }
        let rho = self.ctx.scenario.rho(node);
        self.log(t, v, EventKind::Collect, Some(node), Some(rho));
        self.vehicles[v].summary.collected.push(node);
        let ready = t + self.ctx.believed.service(node);
        self.at_node(v, ready);
    }

    /// Periodic check of every vehicle still in transit to a sensor node.
    fn tick(&mut self, now: f64) {
        let end = self.end();
        for v in 0..self.vehicles.len() {
            let veh = &self.vehicles[v];
            if veh.in_transit() && veh.target != end {
                self.checkpoint(v, now);
            }
        }
        if self.options.coordination {
            self.auction(0, now);
        }
    }
}

struct FleetValuation<'s, 'a> {
    sim: &'s Sim<'a>,
    views: Vec<AgentView>,
}

impl FleetValuation<'_, '_> {
    fn insertion(&self, agent: usize, node: usize) -> Option<(usize, f64)> {
        let view = &self.views[agent];
        let budget = view.remaining_budget() - self.sim.reserve(view.position, &view.route);
        let ins = best_insertion(view.position, &view.route, node, budget, &self.sim.ctx.believed)?;
        let mut route = view.route.clone();
        route.insert(ins.position, node);
        let trial = AgentView { route, ..view.clone() };
        (!self.sim.violates(&trial)).then_some((ins.position, ins.psi))
    }
}

impl Valuation for FleetValuation<'_, '_> {
    fn agent_count(&self) -> usize {
        self.views.len()
    }

    fn value(&self, agent: usize, node: usize) -> f64 {
        self.insertion(agent, node).map_or(0.0, |(_, psi)| psi)
    }

    fn award(&mut self, agent: usize, node: usize) {
        if let Some((position, _)) = self.insertion(agent, node) {
            self.views[agent].route.insert(position, node);
        }
    }
}

/// Runs one mission to completion. Deterministic for a given seed.
pub fn simulate_mission(
    plan: &FleetPlan,
    ctx: &MissionContext,
    true_field: &CurrentField,
    options: &MissionOptions,
    seed: u64,
) -> MissionLog {
    let vehicles = plan
        .routes
        .iter()
        .enumerate()
        .map(|(v, r)| Vehicle {
            id: v,
            at: 0,
            target: 0,
            route: r.nodes.clone(),
            arrival: 0.0,
            expected_ready: 0.0,
            legs: 0,
            finished: false,
            summary: VehicleSummary {
                vehicle: v,
                finish_time: 0.0,
                collected: Vec::new(),
                discards: 0,
                pickups: 0,
                stranded: false,
            },
        })
        .collect();
    let mut sim = Sim {
        ctx,
        true_field,
        options,
        seed,
        vehicles,
        idle: plan.idle_nodes.clone(),
        events: Vec::new(),
        replanned: HashMap::new(),
    };

    for v in 0..sim.vehicles.len() {
        sim.at_node(v, 0.0);
    }
    let interval = match options.checkpoints {
        Checkpoints::Periodic { interval } if interval > 0.0 => Some(interval),
        _ => None,
    };
    let mut next_tick = interval.unwrap_or(f64::INFINITY);
    loop {
        let next = sim
            .vehicles
            .iter()
            .filter(|v| !v.finished)
            .min_by(|a, b| a.arrival.total_cmp(&b.arrival).then(a.id.cmp(&b.id)))
            .map(|v| (v.id, v.arrival));
        let Some((v, t)) = next else { break };
        if next_tick < t {
            sim.tick(next_tick);
            next_tick += interval.unwrap_or(f64::INFINITY);
            continue;
        }
        sim.arrive(v);
    }

    let (theta, j) = completion_metrics(&sim.events, &ctx.scenario);
    MissionLog {
        scenario: digest(&ctx.scenario),
        seed,
        options: options.clone(),
        path_aware: ctx.is_path_aware(),
        events: sim.events,
        vehicles: sim.vehicles.into_iter().map(|v| v.summary).collect(),
        theta,
        j,
    }
}

/// Everything a Monte-Carlo batch varies besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloConfig {
    pub planner: PlannerParams,
    pub mission: MissionOptions,
    pub perturbation: Perturbation,
    pub path_aware: bool,
    pub path_planner: PathPlannerParams,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        Self {
            planner: PlannerParams::default(),
            mission: MissionOptions::default(),
            perturbation: Perturbation::default(),
            path_aware: true,
            path_planner: PathPlannerParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub run: usize,
    pub seed: u64,
    #[serde(rename = "M")]
    pub m: usize,
    pub theta: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub discards: usize,
    pub pickups: usize,
    /// Simulated time until the last vehicle is back, s.
    pub runtime_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    /// Sample statistics; the std of a single value is zero.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            std,
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub master_seed: u64,
    pub config_hash: String,
    pub rows: Vec<MetricsRow>,
    /// Mission logs, kept only when requested.
    #[serde(skip)]
    pub logs: Vec<MissionLog>,
}

impl MetricsTable {
    pub fn theta(&self) -> Stats {
        Stats::of(&self.rows.iter().map(|r| r.theta).collect::<Vec<_>>())
    }

    pub fn j(&self) -> Stats {
        Stats::of(&self.rows.iter().map(|r| r.j).collect::<Vec<_>>())
    }

    pub fn discards(&self) -> Stats {
        Stats::of(&self.rows.iter().map(|r| r.discards as f64).collect::<Vec<_>>())
    }

    pub fn pickups(&self) -> Stats {
        Stats::of(&self.rows.iter().map(|r| r.pickups as f64).collect::<Vec<_>>())
    }

    /// CSV with a `#` preamble naming the tool version, seed and config digest.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# fleetroute {}\n# seed={} config={}\n",
            env!("CARGO_PKG_VERSION"),
            self.master_seed,
            self.config_hash
        );
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).expect("row serializes");
        }
        let body = w.into_inner().expect("in-memory writer");
        out.push_str(std::str::from_utf8(&body).expect("csv is utf-8"));
        out
    }
}

fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("FLEETROUTE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// Seed of Monte-Carlo run `run` under `master_seed`.
pub fn run_seed(master_seed: u64, run: usize) -> u64 {
    derive_seed2(master_seed, stream::RUN, run as u64)
}

/// One mission in a field realized from `believed` with the run's seed.
pub fn simulate_run(ctx: &MissionContext, plan: &FleetPlan, config: &MonteCarloConfig, believed: &CurrentField, seed: u64) -> MissionLog {
    let field = realize_true_field(believed, &config.perturbation, derive_seed(seed, stream::FIELD));
    simulate_mission(plan, ctx, &field, &config.mission, derive_seed(seed, stream::MISSION))
}

/// Simulates `runs` missions of a fixed plan, each in its own realized field.
pub fn run_monte_carlo(
    ctx: &MissionContext,
    plan: &FleetPlan,
    config: &MonteCarloConfig,
    runs: usize,
    master_seed: u64,
    keep_logs: bool,
) -> MetricsTable {
    use rayon::prelude::*;
    assert!(runs >= 1, "need at least one run");
    let believed = ctx.scenario.field();
    let results: Vec<(MetricsRow, Option<MissionLog>)> = thread_pool().install(|| {
        (0..runs)
            .into_par_iter()
            .map(|run| {
                let seed = run_seed(master_seed, run);
                let log = simulate_run(ctx, plan, config, &believed, seed);
                let row = MetricsRow {
                    run,
                    seed,
                    m: plan.m,
                    theta: log.theta,
                    j: log.j,
                    discards: log.discards(),
                    pickups: log.pickups(),
                    runtime_s: log.makespan(),
                };
                (row, keep_logs.then_some(log))
            })
            .collect()
    });
    let (rows, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    MetricsTable {
        master_seed,
        config_hash: digest(config),
        rows,
        logs: logs.into_iter().flatten().collect(),
    }
}

/// Plans once for the scenario, then runs the Monte-Carlo batch.
pub fn monte_carlo(scenario: &Scenario, config: &MonteCarloConfig, runs: usize, master_seed: u64) -> Result<MetricsTable, MissionError> {
    let prop = config.mission.prop_speed;
    let planner = PlannerParams {
        prop_speed: prop,
        ..config.planner.clone()
    };
    let plan = preplan_fleet(scenario, config.mission.tmax, &planner, master_seed)?;
    let ctx = if config.path_aware {
        MissionContext::path_aware(scenario, prop, &config.path_planner, master_seed)?
    } else {
        MissionContext::matrix_mode(scenario, prop)
    };
    Ok(run_monte_carlo(&ctx, &plan, config, runs, master_seed, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::pre_planner::FleetPlan;
    use crate::route_optimizer::Route;
    use crate::scenario::{generate_scenario, Node, ScenarioConfig};
    use rand::{Rng as _, SeedableRng};

    fn small_scenario(seed: u64) -> Scenario {
        generate_scenario(&ScenarioConfig {
            region_size: 4000.0,
            node_count: 15,
            node_margin: 300.0,
            vortex_count: 3,
            obstacle_count: 2,
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap()
    }

    const TMAX: f64 = 8000.0;

    fn options(coordination: bool, noise: NoiseModel) -> MissionOptions {
        MissionOptions {
            coordination,
            tmax: TMAX,
            noise,
            ..MissionOptions::default()
        }
    }

    fn plan_for(s: &Scenario) -> FleetPlan {
        preplan_fleet(s, TMAX, &PlannerParams::default(), 3).unwrap()
    }

    #[test]
    fn violation_check_is_strict() {
        let s = small_scenario(1);
        let m = build_cost_matrix(&s, 1.0);
        let far = AgentView {
            vehicle: 0,
            position: 0,
            elapsed: TMAX - 10.0,
            route: vec![],
            tmax: TMAX,
        };
        assert!(check_time_violation(&far, &m));
        let route = vec![3, 1, 7];
        let exact = AgentView {
            vehicle: 0,
            position: 2,
            elapsed: TMAX - m.route_time_from(2, &route),
            route,
            tmax: TMAX,
        };
        assert!(!check_time_violation(&exact, &m));
    }

    #[test]
    fn violation_check_matches_resummation() {
        let s = small_scenario(2);
        let m = build_cost_matrix(&s, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let position = rng.random_range(0..=15);
            let mut route: Vec<usize> = (1..=15).filter(|&j| j != position && rng.random_bool(0.4)).collect();
            route.sort_by_key(|_| rng.random::<u32>());
            let elapsed = rng.random_range(0.0..TMAX);
            let mut total = 0.0;
            let mut prev = position;
            for &j in route.iter().chain(std::iter::once(&16)) {
                let d = s.position(prev).distance(s.position(j));
                let service = if j == 16 { 0.0 } else { s.t0 + s.service_coeff * s.rho(j) };
                total += d + service;
                prev = j;
            }
            let view = AgentView {
                vehicle: 0,
                position,
                elapsed,
                route,
                tmax: TMAX,
            };
            let expected = total > TMAX - elapsed;
            // avoid knife-edge cases that only differ by rounding
            if (total - (TMAX - elapsed)).abs() > 1e-6 {
                assert_eq!(check_time_violation(&view, &m), expected);
            }
        }
    }

    #[test]
    fn zero_noise_reproduces_plan() {
        let s = small_scenario(3);
        let plan = plan_for(&s);
        let ctx = MissionContext::matrix_mode(&s, 1.0);
        let mut opts = options(false, NoiseModel::ZERO);
        opts.safety = SafetyMargin::NONE;
        let log = simulate_mission(&plan, &ctx, &s.field(), &opts, 11);
        let expected = plan.expected_completion(&ctx.believed);
        assert!((log.theta - expected).abs() < 1e-12);
        assert_eq!(log.discards(), 0);
        for (v, r) in plan.routes.iter().enumerate() {
            assert_eq!(log.vehicles[v].collected, r.nodes);
            assert!((log.vehicles[v].finish_time - r.expected_time).abs() < 1e-6);
        }
    }

    #[test]
    fn unreachable_node_is_discarded() {
        let mut s = small_scenario(4);
        s.nodes = vec![
            Node { id: 1, x: 3000.0, y: 1200.0, rho: 0.5 },
            Node { id: 2, x: 200.0, y: 3900.0, rho: 0.5 },
        ];
        s.start = Point::new(2000.0, 1000.0);
        s.end = Point::new(2500.0, 1000.0);
        s.obstacles.clear();
        let ctx = MissionContext::matrix_mode(&s, 1.0);
        let plan = FleetPlan {
            m: 1,
            tmax: 3000.0,
            routes: vec![Route::new(0, vec![1, 2], &ctx.believed)],
            idle_nodes: vec![],
        };
        let opts = MissionOptions {
            tmax: 3000.0,
            coordination: false,
            ..MissionOptions::default()
        };
        let log = simulate_mission(&plan, &ctx, &s.field(), &opts, 1);
        let discarded: Vec<usize> = log.events.iter().filter(|e| e.kind == EventKind::Discard).filter_map(|e| e.node).collect();
        assert_eq!(discarded, vec![2]);
        assert_eq!(log.vehicles[0].collected, vec![1]);
        assert!(log.vehicles[0].finish_time <= 3000.0);
        assert_eq!(log.strands(), 0);
    }

    fn collect_event(node: usize) -> MissionEvent {
        MissionEvent {
            time: 0.0,
            vehicle: 0,
            kind: EventKind::Collect,
            node: Some(node),
            payload: None,
        }
    }

    #[test]
    fn metrics_replay() {
        let s = small_scenario(5);
        let all: Vec<MissionEvent> = (1..=15).map(collect_event).collect();
        let (theta, j) = completion_metrics(&all, &s);
        assert!((theta - 1.0).abs() < 1e-12);
        assert!((j - s.total_rho()).abs() < 1e-12);
        assert_eq!(completion_metrics(&[], &s), (0.0, 0.0));

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let picked: Vec<usize> = (1..=15).filter(|_| rng.random_bool(0.5)).collect();
            let mut events: Vec<MissionEvent> = picked.iter().map(|&n| collect_event(n)).collect();
            events.push(MissionEvent {
                kind: EventKind::Discard,
                ..collect_event(1)
            });
            let hand: f64 = picked.iter().map(|&n| s.nodes[n - 1].rho).sum();
            let (theta, j) = completion_metrics(&events, &s);
            assert!((j - hand).abs() < 1e-12);
            assert!((theta - hand / s.total_rho()).abs() < 1e-12);
        }
    }

    fn audit(log: &MissionLog, s: &Scenario, plan: &FleetPlan, tmax: f64) {
        let mut seen = std::collections::BTreeSet::new();
        for v in &log.vehicles {
            assert!(v.finish_time <= tmax, "vehicle {} late: {}", v.vehicle, v.finish_time);
            for &n in &v.collected {
                assert!(seen.insert(n), "node {n} collected twice");
            }
        }
        assert_eq!(log.strands(), 0);
        assert!((0.0..=1.0).contains(&log.theta), "theta {}", log.theta);
        assert_eq!(completion_metrics(&log.events, s), (log.theta, log.j));
        for v in 0..plan.m {
            let mine: Vec<&MissionEvent> = log.events.iter().filter(|e| e.vehicle == v && e.kind != EventKind::Reject).collect();
            assert!(mine.windows(2).all(|w| w[0].time <= w[1].time));
            for (k, e) in mine.iter().enumerate() {
                if e.kind == EventKind::Collect {
                    assert_eq!(mine[k - 1].kind, EventKind::Arrive);
                    assert_eq!(mine[k - 1].node, e.node);
                }
            }
        }
        let awarded: std::collections::BTreeSet<usize> =
            log.events.iter().filter(|e| e.kind == EventKind::Award).filter_map(|e| e.node).collect();
        let planned: std::collections::BTreeSet<usize> = plan.routes.iter().flat_map(|r| r.nodes.iter().copied()).collect();
        assert!(seen.iter().all(|n| planned.contains(n) || awarded.contains(n)));
    }

    #[test]
    fn noisy_missions_are_sound_and_reproducible() {
        let s = small_scenario(6);
        let plan = plan_for(&s);
        let ctx = MissionContext::matrix_mode(&s, 1.0);
        for coordination in [false, true] {
            for seed in 0..20 {
                let opts = options(coordination, NoiseModel::default());
                let log = simulate_mission(&plan, &ctx, &s.field(), &opts, seed);
                audit(&log, &s, &plan, TMAX);
                assert_eq!(log, simulate_mission(&plan, &ctx, &s.field(), &opts, seed));
                let back = MissionLog::from_jsonl(&log.to_jsonl()).unwrap();
                assert_eq!(back, log);
                assert_eq!(completion_metrics(&back.events, &s), (log.theta, log.j));
            }
        }
    }

    #[test]
    fn periodic_checkpoints_stay_sound() {
        let s = small_scenario(7);
        let plan = plan_for(&s);
        let ctx = MissionContext::matrix_mode(&s, 1.0);
        let mut opts = options(true, NoiseModel::default());
        opts.checkpoints = Checkpoints::Periodic { interval: 600.0 };
        for seed in 0..10 {
            audit(&simulate_mission(&plan, &ctx, &s.field(), &opts, seed), &s, &plan, TMAX);
        }
    }

    #[test]
    fn monte_carlo_tables() {
        let s = small_scenario(8);
        let mut cfg = MonteCarloConfig {
            path_aware: false,
            ..MonteCarloConfig::default()
        };
        cfg.mission.tmax = TMAX;
        let one = monte_carlo(&s, &cfg, 1, 4).unwrap();
        assert_eq!(one.rows.len(), 1);
        assert_eq!(one.theta().mean, one.rows[0].theta);
        assert_eq!(one.theta().std, 0.0);

        let a = monte_carlo(&s, &cfg, 6, 9).unwrap();
        let b = monte_carlo(&s, &cfg, 6, 9).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.rows.iter().enumerate().all(|(k, r)| r.run == k));
        let csv = a.to_csv();
        let mut lines = csv.lines().filter(|l| !l.starts_with('#'));
        assert_eq!(lines.next(), Some("run,seed,M,theta,J,discards,pickups,runtime_s"));
        assert_eq!(lines.count(), 6);

        cfg.mission.noise = NoiseModel::ZERO;
        cfg.perturbation = Perturbation::NONE;
        let flat = monte_carlo(&s, &cfg, 8, 2).unwrap();
        assert_eq!(flat.theta().std, 0.0);
    }

    #[test]
    fn stats_of_values() {
        let st = Stats::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(st.mean, 2.5);
        assert!((st.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!((st.min, st.max), (1.0, 4.0));
    }
}
