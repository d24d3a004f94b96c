//! Single-vehicle routing under a time budget with sampled travel-time noise,
//! node dropping and insertion scoring, and the full pre-departure planner.

use crate::giant_route::{build_cost_matrix, solve_giant_route, CostMatrix, GaParams, GiantRoute};
use crate::pre_planner::{
    estimate_fleet_size, estimate_overhead, kmeans_allocation, segment_giant_route, Allocation, FleetPlan, PrePlanError, SegmentOptions,
    Segmentation,
};
use crate::scenario::Scenario;
use crate::seeding::{derive_seed, derive_seed2, rng_from_seed, stream, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// Travel-time uncertainty: Gaussian drift proportional to the nominal time
/// plus a Poisson number of fixed-cost maneuvers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Gaussian std as a fraction of the nominal leg time.
    pub sigma_frac: f64,
    /// Expected maneuvers per hour of transit.
    pub maneuver_rate: f64,
    /// Seconds added per maneuver.
    pub maneuver_cost: f64,
    /// A draw never falls below this fraction of the nominal time.
    pub floor_frac: f64,
}

impl NoiseModel {
    pub const ZERO: NoiseModel = NoiseModel {
        sigma_frac: 0.0,
        maneuver_rate: 0.0,
        maneuver_cost: 0.0,
        floor_frac: 1.0,
    };

    pub fn is_valid(&self) -> bool {
        self.sigma_frac >= 0.0
            && self.maneuver_rate >= 0.0
            && self.maneuver_cost >= 0.0
            && self.floor_frac > 0.0
            && self.floor_frac <= 1.0
    }

    /// Mean extra time from maneuvers on a leg of `nominal` seconds.
    pub fn expected_maneuver_time(&self, nominal: f64) -> f64 {
        self.maneuver_rate * nominal / 3600.0 * self.maneuver_cost
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            sigma_frac: 0.1,
            maneuver_rate: 1.0,
            maneuver_cost: 60.0,
            floor_frac: 0.5,
        }
    }
}

/// One realized transit time for a leg of `nominal` seconds.
pub fn sample_leg_time(nominal: f64, noise: &NoiseModel, rng: &mut Rng) -> f64 {
    if !(nominal > 0.0) {
        return nominal.max(0.0);
    }
    let z: f64 = StandardNormal.sample(rng);
    draw_from(nominal, noise, z, maneuver_count(nominal, noise, rng))
}

fn maneuver_count(nominal: f64, noise: &NoiseModel, rng: &mut Rng) -> f64 {
    let lambda = noise.maneuver_rate * nominal / 3600.0;
    if lambda > 0.0 && noise.maneuver_cost > 0.0 {
        Poisson::new(lambda).map_or(0.0, |p| p.sample(rng))
    } else {
        0.0
    }
}

fn draw_from(nominal: f64, noise: &NoiseModel, z: f64, maneuvers: f64) -> f64 {
    let t = nominal + noise.sigma_frac * nominal * z + maneuvers * noise.maneuver_cost;
    t.max(noise.floor_frac * nominal)
}

/// One realized time of `origin` → `nodes` → end: sampled transits plus fixed service.
pub fn route_cost_sample(origin: usize, nodes: &[usize], matrix: &CostMatrix, noise: &NoiseModel, rng: &mut Rng) -> f64 {
    let mut prev = origin;
    let mut total = 0.0;
    for &j in nodes.iter().chain(std::iter::once(&matrix.end())) {
        total += sample_leg_time(matrix.transit(prev, j), noise, rng) + matrix.service(j);
        prev = j;
    }
    total
}

/// A vehicle's planned sensor-node sequence; start and end are implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub vehicle: usize,
    pub nodes: Vec<usize>,
    pub expected_time: f64,
    pub expected_value: f64,
}

impl Route {
    pub fn new(vehicle: usize, nodes: Vec<usize>, matrix: &CostMatrix) -> Self {
        Self {
            vehicle,
            expected_time: matrix.route_time(&nodes),
            expected_value: matrix.value(&nodes),
            nodes,
        }
    }
}

/// Fixed table of sampled leg times shared by every evaluation, so that
/// candidate routes are compared on common random numbers.
#[derive(Debug, Clone)]
pub struct SampleTable {
    n: usize,
    samples: usize,
    legs: Vec<f64>,
    rank: usize,
}

impl SampleTable {
    pub fn new(matrix: &CostMatrix, noise: &NoiseModel, samples: usize, quantile: f64, confidence: f64, seed: u64) -> Self {
        let n = matrix.size();
        let samples = samples.max(1);
        let mut legs = vec![0.0; n * n * samples];
        for i in 0..n {
            let mut rng = rng_from_seed(derive_seed(seed, i as u64));
            for j in 0..n {
                let base = (i * n + j) * samples;
                let nominal = matrix.transit(i, j);
                for s in 0..samples {
                    legs[base + s] = sample_leg_time(nominal, noise, &mut rng);
                }
            }
        }
        Self {
            n,
            samples,
            legs,
            rank: conservative_rank(samples, quantile, confidence),
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// All sampled totals of `origin` → `nodes` → end.
    pub fn route_samples(&self, matrix: &CostMatrix, origin: usize, nodes: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; self.samples];
        let mut service = 0.0;
        let mut prev = origin;
        for &j in nodes.iter().chain(std::iter::once(&matrix.end())) {
            let base = (prev * self.n + j) * self.samples;
            for (o, l) in out.iter_mut().zip(&self.legs[base..base + self.samples]) {
                *o += l;
            }
            service += matrix.service(j);
            prev = j;
        }
        for o in &mut out {
            *o += service;
        }
        out
    }

    /// Upper confidence bound on the route's time quantile.
    pub fn robust_time(&self, matrix: &CostMatrix, origin: usize, nodes: &[usize]) -> f64 {
        let mut s = self.route_samples(matrix, origin, nodes);
        let k = self.rank;
        *s.select_nth_unstable_by(k, f64::total_cmp).1
    }
}

/// 0-based order statistic of `samples` draws that bounds the `quantile` from
/// above with probability at least `confidence`.
fn conservative_rank(samples: usize, quantile: f64, confidence: f64) -> usize {
    // P(X_(k+1) >= ξ_q) = P(Binomial(S, q) <= k)
    let mut cdf = 0.0;
    let mut pmf = (1.0 - quantile).powi(samples as i32);
    for k in 0..samples {
        cdf += pmf;
        if cdf >= confidence {
            return k;
        }
        pmf *= (samples - k) as f64 / (k + 1) as f64 * quantile / (1.0 - quantile);
    }
    samples - 1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Insertion {
    /// Index in the route's node list where the node goes.
    pub position: usize,
    pub psi: f64,
    /// Added expected time, s.
    pub delta: f64,
}

/// Added time of putting `node` between `prev` and `next`.
fn insertion_delta(matrix: &CostMatrix, prev: usize, node: usize, next: usize) -> f64 {
    matrix.entry(prev, node) + matrix.entry(node, next) - matrix.entry(prev, next)
}

/// Best place for `node` in `origin` → `nodes` → end by ρ / added time.
/// Positions whose new route time exceeds `budget_remaining` are skipped;
/// `None` when none fits. Ties go to the earliest position.
pub fn best_insertion(
    origin: usize,
    nodes: &[usize],
    node: usize,
    budget_remaining: f64,
    matrix: &CostMatrix,
) -> Option<Insertion> {
    let current = matrix.route_time_from(origin, nodes);
    let rho = matrix.rho(node);
    let mut best: Option<Insertion> = None;
    for pos in 0..=nodes.len() {
        let prev = if pos == 0 { origin } else { nodes[pos - 1] };
        let next = nodes.get(pos).copied().unwrap_or(matrix.end());
        let delta = insertion_delta(matrix, prev, node, next);
        if !(current + delta <= budget_remaining) {
            continue;
        }
        let psi = rho / delta.max(1e-9);
        if best.is_none_or(|b| psi > b.psi) {
            best = Some(Insertion { position: pos, psi, delta });
        }
    }
    best
}

/// Time saved by removing each node, in route order.
fn removal_savings(matrix: &CostMatrix, origin: usize, nodes: &[usize]) -> Vec<f64> {
    (0..nodes.len())
        .map(|k| {
            let prev = if k == 0 { origin } else { nodes[k - 1] };
            let next = nodes.get(k + 1).copied().unwrap_or(matrix.end());
            matrix.entry(prev, nodes[k]) + matrix.entry(nodes[k], next) - matrix.entry(prev, next)
        })
        .collect()
}

/// Removes nodes with the lowest ρ / saved-time ratio, one at a time and
/// re-scoring after each removal, until the total saving reaches
/// `required_saving` or the route is empty. Ties go to the lowest node id.
pub fn drop_least_efficient(
    origin: usize,
    nodes: &[usize],
    required_saving: f64,
    matrix: &CostMatrix,
) -> (Vec<usize>, Vec<usize>) {
    let mut kept = nodes.to_vec();
    let mut dropped = Vec::new();
    let mut saved = 0.0;
    while saved < required_saving && !kept.is_empty() {
        let k = least_efficient(matrix, origin, &kept);
        let saving = removal_savings(matrix, origin, &kept)[k];
        saved += saving;
        dropped.push(kept.remove(k));
    }
    (kept, dropped)
}

fn least_efficient(matrix: &CostMatrix, origin: usize, nodes: &[usize]) -> usize {
    let savings = removal_savings(matrix, origin, nodes);
    let phi = |k: usize| matrix.rho(nodes[k]) / savings[k].max(1e-9);
    (0..nodes.len())
        .min_by(|&a, &b| phi(a).total_cmp(&phi(b)).then(nodes[a].cmp(&nodes[b])))
        .expect("nonempty route")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerParams {
    pub population: usize,
    pub generations: usize,
    /// Stop after this many generations without improvement.
    pub stall_generations: usize,
    pub mutation_rate: f64,
    pub tournament: usize,
    /// Sampled route time at this quantile must fit the budget.
    pub quantile: f64,
    /// Confidence that the sampled bound covers the quantile.
    pub confidence: f64,
    pub samples: usize,
}

impl Default for OptimizerParams {
    fn default() -> Self {
        Self {
            population: 30,
            generations: 80,
            stall_generations: 25,
            mutation_rate: 0.4,
            tournament: 3,
            quantile: 0.9,
            confidence: 0.95,
            samples: 64,
        }
    }
}

/// Search context for one vehicle.
struct Search<'a> {
    matrix: &'a CostMatrix,
    table: &'a SampleTable,
    origin: usize,
    budget: f64,
    candidates: Vec<usize>,
}

#[derive(Clone)]
struct Individual {
    nodes: Vec<usize>,
    value: f64,
    time: f64,
}

impl Search<'_> {
    fn feasible(&self, nodes: &[usize]) -> bool {
        self.matrix.route_time_from(self.origin, nodes) <= self.budget
            && self.table.robust_time(self.matrix, self.origin, nodes) <= self.budget
    }

    fn score(&self, nodes: Vec<usize>) -> Individual {
        Individual {
            value: self.matrix.value(&nodes),
            time: self.matrix.route_time_from(self.origin, &nodes),
            nodes,
        }
    }

    /// Drops least-efficient nodes until the route fits.
    fn trim(&self, nodes: &mut Vec<usize>) {
        while !nodes.is_empty() && !self.feasible(nodes) {
            let k = least_efficient(self.matrix, self.origin, nodes);
            nodes.remove(k);
        }
    }

    /// Greedy ratio insertion of unused candidates while they fit.
    fn fill(&self, nodes: &mut Vec<usize>) {
        let mut rejected: Vec<usize> = Vec::new();
        loop {
            let mut options: Vec<(usize, Insertion)> = self
                .candidates
                .iter()
                .filter(|c| !nodes.contains(c) && !rejected.contains(c))
                .filter_map(|&c| best_insertion(self.origin, nodes, c, self.budget, self.matrix).map(|ins| (c, ins)))
                .collect();
            if options.is_empty() {
                return;
            }
            options.sort_by(|a, b| b.1.psi.total_cmp(&a.1.psi).then(a.0.cmp(&b.0)));
            let mut inserted = false;
            for (c, ins) in options {
                nodes.insert(ins.position, c);
                if self.feasible(nodes) {
                    inserted = true;
                    break;
                }
                nodes.remove(ins.position);
                rejected.push(c);
            }
            if !inserted {
                return;
            }
        }
    }

    /// Inserts candidates in the given order at their cheapest feasible position.
    fn fill_in_order(&self, order: &[usize]) -> Vec<usize> {
        let mut nodes = Vec::new();
        for &c in order {
            if let Some(ins) = best_insertion(self.origin, &nodes, c, self.budget, self.matrix) {
                nodes.insert(ins.position, c);
                if !self.feasible(&nodes) {
                    nodes.remove(ins.position);
                }
            }
        }
        nodes
    }

    /// 2-opt on expected time.
    fn polish(&self, nodes: &mut [usize]) {
        let n = nodes.len();
        let mut current = self.matrix.route_time_from(self.origin, nodes);
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..n {
                for j in i + 1..n {
                    nodes[i..=j].reverse();
                    let t = self.matrix.route_time_from(self.origin, nodes);
                    if t < current - 1e-9 {
                        current = t;
                        improved = true;
                    } else {
                        nodes[i..=j].reverse();
                    }
                }
            }
        }
    }

    fn repair(&self, mut nodes: Vec<usize>) -> Individual {
        self.polish(&mut nodes);
        self.trim(&mut nodes);
        self.fill(&mut nodes);
        self.polish(&mut nodes);
        if !self.feasible(&nodes) {
            self.trim(&mut nodes);
        }
        self.score(nodes)
    }

    fn greedy(&self) -> Individual {
        self.repair(Vec::new())
    }
}

/// Higher value first, then lower expected time.
fn better(a: &Individual, b: &Individual) -> bool {
    a.value > b.value + 1e-12 || ((a.value - b.value).abs() <= 1e-12 && a.time < b.time - 1e-9)
}

fn best_index(pop: &[Individual]) -> usize {
    (0..pop.len()).fold(0, |best, i| if better(&pop[i], &pop[best]) { i } else { best })
}

/// Chooses and orders a subset of `candidates` maximizing collected data while
/// the sampled quantile of the route time stays within `budget`.
///
/// The route starts at `origin` and ends at the recovery point. Deterministic
/// per seed; never worse in value than greedy ratio insertion, nor than
/// `incumbent` when it is feasible.
#[allow(clippy::too_many_arguments)]
pub fn optimize_route(
    origin: usize,
    candidates: &[usize],
    budget: f64,
    matrix: &CostMatrix,
    table: &SampleTable,
    params: &OptimizerParams,
    incumbent: Option<&[usize]>,
    seed: u64,
) -> Vec<usize> {
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let search = Search {
        matrix,
        table,
        origin,
        budget,
        candidates: sorted,
    };
    if search.candidates.is_empty() || !search.feasible(&[]) {
        return Vec::new();
    }
    let mut rng = rng_from_seed(seed);
    let np = params.population.max(4);

    let mut pop = vec![search.greedy()];
    if let Some(inc) = incumbent {
        if search.feasible(inc) {
            let mut seeded = inc.to_vec();
            search.fill(&mut seeded);
            pop.push(search.score(seeded));
        }
    }
    while pop.len() < np {
        let mut order = search.candidates.clone();
        order.shuffle(&mut rng);
        let nodes = search.fill_in_order(&order);
        pop.push(search.repair(nodes));
    }

    let mut best = pop[best_index(&pop)].clone();
    let mut stall = 0;
    for _ in 0..params.generations {
        let mut next = vec![best.clone()];
        while next.len() < np {
            let a = select(&mut rng, &pop, params.tournament);
            let b = select(&mut rng, &pop, params.tournament);
            let mut child = subset_crossover(&mut rng, &pop[a].nodes, &pop[b].nodes);
            if rng.random::<f64>() < params.mutation_rate {
                mutate(&mut rng, &mut child, &search.candidates);
            }
            next.push(search.repair(child));
        }
        pop = next;
        let lead = best_index(&pop);
        if better(&pop[lead], &best) {
            best = pop[lead].clone();
            stall = 0;
        } else {
            stall += 1;
            if stall >= params.stall_generations {
                break;
            }
        }
    }
    best.nodes
}

fn select(rng: &mut Rng, pop: &[Individual], size: usize) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size.max(1) {
        let c = rng.random_range(0..pop.len());
        if better(&pop[c], &pop[best]) {
            best = c;
        }
    }
    best
}

/// Keeps a slice of `a` and places the remaining nodes of `b` around it in `b`'s order.
fn subset_crossover(rng: &mut Rng, a: &[usize], b: &[usize]) -> Vec<usize> {
    if a.is_empty() {
        return b.to_vec();
    }
    let mut i = rng.random_range(0..a.len());
    let mut j = rng.random_range(0..a.len());
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let kept = &a[i..=j];
    let rest: Vec<usize> = b.iter().copied().filter(|g| !kept.contains(g)).collect();
    let split = if a.len() > 1 { i * rest.len() / a.len() } else { 0 };
    let mut child = rest[..split].to_vec();
    child.extend_from_slice(kept);
    child.extend_from_slice(&rest[split..]);
    child
}

fn mutate(rng: &mut Rng, nodes: &mut Vec<usize>, candidates: &[usize]) {
    let unused: Vec<usize> = candidates.iter().copied().filter(|c| !nodes.contains(c)).collect();
    match rng.random_range(0..4) {
        0 if !nodes.is_empty() => {
            let k = rng.random_range(0..nodes.len());
            nodes.remove(k);
        }
        1 if !unused.is_empty() => {
            let c = unused[rng.random_range(0..unused.len())];
            let pos = rng.random_range(0..=nodes.len());
            nodes.insert(pos, c);
        }
        2 if nodes.len() >= 2 => {
            let i = rng.random_range(0..nodes.len());
            let j = rng.random_range(0..nodes.len());
            nodes.swap(i, j);
        }
        _ if !nodes.is_empty() && !unused.is_empty() => {
            // exchange a routed node for an unused one
            let k = rng.random_range(0..nodes.len());
            nodes[k] = unused[rng.random_range(0..unused.len())];
        }
        _ => {}
    }
}

/// Everything the pre-departure planner needs besides the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerParams {
    pub prop_speed: f64,
    pub giant_route: GaParams,
    pub segmentation: SegmentOptions,
    pub noise: NoiseModel,
    pub optimizer: OptimizerParams,
    /// Upper bound on idle-node pickup sweeps.
    pub max_pickup_sweeps: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            prop_speed: 1.0,
            giant_route: GaParams::default(),
            segmentation: SegmentOptions::default(),
            noise: NoiseModel::default(),
            optimizer: OptimizerParams::default(),
            max_pickup_sweeps: 20,
        }
    }
}

/// Intermediate products of [`preplan_fleet`].
#[derive(Debug, Clone)]
pub struct Preplan {
    pub matrix: CostMatrix,
    pub giant_route: GiantRoute,
    pub overhead: f64,
    pub segmentation: Segmentation,
    pub plan: FleetPlan,
}

/// Sample table used for robust checks by a plan built with `seed`.
pub fn plan_sample_table(matrix: &CostMatrix, params: &PlannerParams, seed: u64) -> SampleTable {
    let o = &params.optimizer;
    SampleTable::new(matrix, &params.noise, o.samples, o.quantile, o.confidence, derive_seed(seed, stream::PATH))
}

/// Giant route, fleet size, balanced segmentation, per-vehicle optimization
/// and idle-node pickup.
pub fn preplan_fleet(scenario: &Scenario, tmax: f64, params: &PlannerParams, seed: u64) -> Result<FleetPlan, PrePlanError> {
    preplan_fleet_detailed(scenario, tmax, params, seed).map(|p| p.plan)
}

pub fn preplan_fleet_detailed(
    scenario: &Scenario,
    tmax: f64,
    params: &PlannerParams,
    seed: u64,
) -> Result<Preplan, PrePlanError> {
    let matrix = build_cost_matrix(scenario, params.prop_speed);
    let giant_route = solve_giant_route(&matrix, &params.giant_route, derive_seed(seed, stream::GIANT_ROUTE));
    let overhead = estimate_overhead(&giant_route, &matrix);
    let m = estimate_fleet_size(giant_route.total_time, overhead, tmax)?;
    let m = m.min(giant_route.interior().len().max(1));
    let segmentation = segment_giant_route(&giant_route, m, &matrix, params.segmentation)?;
    let plan = plan_from_allocation(&matrix, &Allocation::from(&segmentation), tmax, params, seed);
    Ok(Preplan {
        matrix,
        giant_route,
        overhead,
        segmentation,
        plan,
    })
}

/// Optimizes each vehicle's share, then alternates idle-node pickup and
/// re-optimization until a sweep leaves every route unchanged.
pub fn plan_from_allocation(
    matrix: &CostMatrix,
    allocation: &Allocation,
    tmax: f64,
    params: &PlannerParams,
    seed: u64,
) -> FleetPlan {
    let table = plan_sample_table(matrix, params, seed);
    let vseed = |v: usize, sweep: usize| derive_seed2(seed, stream::VEHICLE, (v as u64) << 16 | sweep as u64);
    let mut routes: Vec<Vec<usize>> = allocation
        .clusters
        .iter()
        .enumerate()
        .map(|(v, cluster)| optimize_route(0, cluster, tmax, matrix, &table, &params.optimizer, None, vseed(v, 0)))
        .collect();
    let idle_of = |routes: &[Vec<usize>]| -> Vec<usize> {
        matrix.nodes().filter(|j| !routes.iter().any(|r| r.contains(j))).collect()
    };

    for sweep in 1..=params.max_pickup_sweeps {
        let before = routes.clone();
        for node in idle_of(&routes) {
            pick_up(matrix, &table, tmax, &mut routes, node);
        }
        for v in 0..routes.len() {
            let mut candidates = routes[v].clone();
            candidates.extend(idle_of(&routes));
            let incumbent = routes[v].clone();
            routes[v] = optimize_route(0, &candidates, tmax, matrix, &table, &params.optimizer, Some(&incumbent), vseed(v, sweep));
        }
        if routes == before {
            break;
        }
    }

    FleetPlan {
        m: routes.len(),
        tmax,
        idle_nodes: idle_of(&routes),
        routes: routes.into_iter().enumerate().map(|(v, nodes)| Route::new(v, nodes, matrix)).collect(),
    }
}

/// Baseline planner: k-means clusters of the node positions, each optimized
/// independently with no idle-node pickup between vehicles.
pub fn kmeans_plan(scenario: &Scenario, matrix: &CostMatrix, m: usize, tmax: f64, params: &PlannerParams, seed: u64) -> FleetPlan {
    let allocation = kmeans_allocation(scenario, m, seed);
    let params = PlannerParams {
        max_pickup_sweeps: 0,
        ..params.clone()
    };
    plan_from_allocation(matrix, &allocation, tmax, &params, seed)
}

/// Gives `node` to the vehicle with the best insertion ratio whose route
/// still passes the robust check. Returns whether anyone took it.
fn pick_up(matrix: &CostMatrix, table: &SampleTable, tmax: f64, routes: &mut [Vec<usize>], node: usize) -> bool {
    let mut offers: Vec<(usize, Insertion)> = routes
        .iter()
        .enumerate()
        .filter_map(|(v, r)| best_insertion(0, r, node, tmax, matrix).map(|ins| (v, ins)))
        .collect();
    offers.sort_by(|a, b| b.1.psi.total_cmp(&a.1.psi).then(a.0.cmp(&b.0)));
    offers.into_iter().any(|(v, ins)| {
        let mut cand = routes[v].clone();
        cand.insert(ins.position, node);
        if table.robust_time(matrix, 0, &cand) <= tmax {
            routes[v] = cand;
            true
        } else {
            false
        }
    })
}
