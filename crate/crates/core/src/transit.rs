//! Point-to-point path planning through a current field.
//!
//! A vehicle holds its track by pointing its propulsion so that the cross-track
//! part of the current is cancelled; whatever propulsion is left over adds to
//! the along-track current. Paths are polylines, timed segment by segment with
//! the current sampled at each segment midpoint, and optimised with
//! differential evolution over a few spline control points.

use crate::geometry::{turn_angle, Circle, Point};
use crate::giant_route::{build_cost_matrix, CostMatrix};
use crate::ocean_field::CurrentField;
use crate::scenario::Scenario;
use crate::seeding::{derive_seed2, rng_from_seed, stream};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Anything that can report a current velocity at a position.
pub trait Current {
    fn velocity_at(&self, pos: Point) -> Point;
}

impl Current for CurrentField {
    fn velocity_at(&self, pos: Point) -> Point {
        self.velocity(pos)
    }
}

/// Spatially constant current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformCurrent(pub Point);

impl Current for UniformCurrent {
    fn velocity_at(&self, _pos: Point) -> Point {
        self.0
    }
}

/// Along-track speed over ground when holding the direction `tangent`.
///
/// Returns `None` when the cross-track current exceeds the propulsion speed or
/// the resulting speed is not positive, i.e. the track cannot be held.
pub fn ground_speed(tangent: Point, current: Point, prop_speed: f64) -> Option<f64> {
    let along = current.dot(tangent);
    let cross = current.cross(tangent);
    let radicand = prop_speed * prop_speed - cross * cross;
    if radicand < 0.0 {
        return None;
    }
    let speed = along + radicand.sqrt();
    (speed > 0.0).then_some(speed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<usize>,
}

impl Path {
    pub fn new(waypoints: Vec<Point>) -> Self {
        Self {
            waypoints,
            source: None,
            target: None,
        }
    }

    pub fn with_nodes(mut self, source: usize, target: usize) -> Self {
        self.source = Some(source);
        self.target = Some(target);
        self
    }

    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(w[1])).sum()
    }

    /// Largest turn between consecutive segments, radians.
    pub fn max_turn(&self) -> f64 {
        self.waypoints
            .windows(3)
            .map(|w| turn_angle(w[1] - w[0], w[2] - w[1]))
            .fold(0.0, f64::max)
    }

    pub fn collides(&self, obstacles: &[Circle]) -> bool {
        self.waypoints
            .windows(2)
            .any(|w| obstacles.iter().any(|o| o.intersects_segment(w[0], w[1])))
    }
}

/// `n`-segment evenly spaced straight line.
pub fn straight_path(a: Point, b: Point, n: usize) -> Path {
    let n = n.max(1);
    Path::new((0..=n).map(|k| a.lerp(b, k as f64 / n as f64)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathTime {
    /// Seconds, or `f64::INFINITY` if some segment cannot be held.
    pub seconds: f64,
    pub feasible: bool,
}

/// Traversal time: Σ |p_{k+1} − p_k| / ground speed at the segment midpoint.
pub fn path_time<C: Current + ?Sized>(path: &Path, field: &C, prop_speed: f64) -> PathTime {
    let mut total = 0.0;
    for w in path.waypoints.windows(2) {
        let delta = w[1] - w[0];
        let len = delta.norm();
        let Some(tangent) = delta.normalized() else {
            continue;
        };
        let mid = w[0].lerp(w[1], 0.5);
        match ground_speed(tangent, field.velocity_at(mid), prop_speed) {
            Some(v) => total += len / v,
            None => {
                return PathTime {
                    seconds: f64::INFINITY,
                    feasible: false,
                }
            }
        }
    }
    PathTime {
        seconds: total,
        feasible: true,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPlannerParams {
    /// Spline control points including both endpoints.
    pub control_point_count: usize,
    /// Number of segments in the returned path.
    pub discretization: usize,
    /// Largest allowed turn between consecutive segments, radians.
    pub max_turn_angle: f64,
    pub population: usize,
    pub iterations: usize,
    pub mutation_factor: f64,
    pub crossover_rate: f64,
    /// Penalty per meter of obstacle penetration.
    pub collision_weight: f64,
    /// Penalty per radian of turn beyond the limit.
    pub turn_weight: f64,
    /// Penalty per meter of segment whose track cannot be held.
    pub current_weight: f64,
    /// Lateral search half-width as a fraction of the leg length.
    pub lateral_span_frac: f64,
    /// Lower bound on the lateral half-width, m.
    pub min_lateral_span: f64,
}

impl Default for PathPlannerParams {
    fn default() -> Self {
        Self {
            control_point_count: 4,
            discretization: 50,
            max_turn_angle: std::f64::consts::FRAC_PI_4,
            population: 16,
            iterations: 40,
            mutation_factor: 0.6,
            crossover_rate: 0.9,
            collision_weight: 1e3,
            turn_weight: 1e3,
            current_weight: 10.0,
            lateral_span_frac: 0.5,
            min_lateral_span: 400.0,
        }
    }
}

impl PathPlannerParams {
    pub fn validate(&self) -> Result<(), PlanError> {
        let ok = self.control_point_count >= 2
            && self.discretization >= self.control_point_count
            && self.max_turn_angle > 0.0
            && self.max_turn_angle <= std::f64::consts::PI
            && self.population >= 4;
        if ok {
            Ok(())
        } else {
            Err(PlanError::InvalidParams)
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PenaltyBreakdown {
    /// Total penetration into obstacles, m.
    pub collision: f64,
    /// Total turn beyond the limit, rad.
    pub turn: f64,
    /// Length of segments that cannot be held against the current, m.
    pub current: f64,
}

impl PenaltyBreakdown {
    pub fn is_clear(&self) -> bool {
        self.collision == 0.0 && self.turn == 0.0 && self.current == 0.0
    }
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("no feasible path found (collision {:.3} m, turn {:.3} rad, current {:.3} m)", .penalties.collision, .penalties.turn, .penalties.current)]
    NoFeasiblePath {
        best: Path,
        penalties: PenaltyBreakdown,
    },
    #[error("path endpoint lies inside an obstacle")]
    EndpointBlocked,
    #[error("invalid path planner parameters")]
    InvalidParams,
}

/// Extra clearance the planner keeps from obstacles, m.
const OBSTACLE_MARGIN: f64 = 1.0;

struct Problem<'a, C: Current + ?Sized> {
    a: Point,
    b: Point,
    axis: Point,
    normal: Point,
    length: f64,
    lateral_span: f64,
    field: &'a C,
    obstacles: Vec<(Circle, f64)>,
    params: &'a PathPlannerParams,
    prop_speed: f64,
}

struct Evaluation {
    cost: f64,
    time: f64,
    penalties: PenaltyBreakdown,
}

impl<C: Current + ?Sized> Problem<'_, C> {
    fn interior(&self) -> usize {
        self.params.control_point_count - 2
    }

    fn dims(&self) -> usize {
        2 * self.interior()
    }

    fn control_points(&self, genes: &[f64]) -> Vec<Point> {
        let k = self.params.control_point_count;
        let spacing = 1.0 / (k - 1) as f64;
        let mut pts = Vec::with_capacity(k);
        pts.push(self.a);
        for i in 1..k - 1 {
            let along = (i as f64 * spacing + genes[2 * (i - 1)] * spacing) * self.length;
            let lateral = genes[2 * (i - 1) + 1] * self.lateral_span;
            pts.push(self.a + self.axis * along + self.normal * lateral);
        }
        pts.push(self.b);
        pts
    }

    fn path(&self, genes: &[f64]) -> Path {
        let pts = self.control_points(genes);
        Path::new(catmull_rom(&pts, self.params.discretization))
    }

    fn evaluate(&self, path: &Path) -> Evaluation {
        let mut time = 0.0;
        let mut pen = PenaltyBreakdown::default();
        for w in path.waypoints.windows(2) {
            let delta = w[1] - w[0];
            let len = delta.norm();
            let Some(tangent) = delta.normalized() else {
                continue;
            };
            let mid = w[0].lerp(w[1], 0.5);
            match ground_speed(tangent, self.field.velocity_at(mid), self.prop_speed) {
                Some(v) => time += len / v,
                None => {
                    pen.current += len;
                    time += len / self.prop_speed;
                }
            }
            for (o, margin) in &self.obstacles {
                let grown = Circle { r: o.r + margin, ..*o };
                pen.collision += grown.penetration(w[0], w[1]);
            }
        }
        for w in path.waypoints.windows(3) {
            let excess = turn_angle(w[1] - w[0], w[2] - w[1]) - self.params.max_turn_angle;
            if excess > 0.0 {
                pen.turn += excess;
            }
        }
        let p = self.params;
        let cost = time + p.collision_weight * pen.collision + p.turn_weight * pen.turn + p.current_weight * pen.current;
        Evaluation {
            cost,
            time,
            penalties: pen,
        }
    }
}

/// Uniform Catmull-Rom spline through `pts`, sampled at `n` equal parameter steps.
/// End tangents come from reflected phantom points, so collinear evenly spaced
/// control points give an evenly spaced straight line.
fn catmull_rom(pts: &[Point], n: usize) -> Vec<Point> {
    let k = pts.len();
    if k == 2 {
        return straight_path(pts[0], pts[1], n).waypoints;
    }
    let at = |i: isize| -> Point {
        if i < 0 {
            pts[0] * 2.0 - pts[1]
        } else if i as usize >= k {
            pts[k - 1] * 2.0 - pts[k - 2]
        } else {
            pts[i as usize]
        }
    };
    let spans = (k - 1) as f64;
    let mut out: Vec<Point> = Vec::with_capacity(n + 1);
    for step in 0..=n {
        let s = step as f64 / n as f64 * spans;
        let seg = (s.floor() as usize).min(k - 2);
        let t = s - seg as f64;
        let i = seg as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        let t2 = t * t;
        let t3 = t2 * t;
        let p = (p1 * 2.0
            + (p2 - p0) * t
            + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * t2
            + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * t3)
            * 0.5;
        if out.last().is_none_or(|q| q.distance(p) > 1e-9) {
            out.push(p);
        }
    }
    // pin the endpoints exactly
    if let Some(first) = out.first_mut() {
        *first = pts[0];
    }
    let last = pts[k - 1];
    match out.last_mut() {
        Some(q) if q.distance(last) <= 1e-9 => *q = last,
        _ => out.push(last),
    }
    out
}

/// Time-optimal collision-free path from `a` to `b`, deterministic per seed.
///
/// Differential evolution (rand/1/bin) searches the interior spline control
/// points; the unmodified straight line is always part of the initial
/// population and is returned whenever it is feasible and no better path was
/// found.
pub fn plan_path<C: Current + ?Sized>(
    a: Point,
    b: Point,
    field: &C,
    obstacles: &[Circle],
    params: &PathPlannerParams,
    prop_speed: f64,
    seed: u64,
) -> Result<Path, PlanError> {
    params.validate()?;
    if obstacles.iter().any(|o| o.contains(a) || o.contains(b)) {
        return Err(PlanError::EndpointBlocked);
    }
    let length = a.distance(b);
    let straight = straight_path(a, b, params.discretization);
    let Some(axis) = (b - a).normalized() else {
        return Ok(Path::new(vec![a, b]));
    };
    let obstacles: Vec<(Circle, f64)> = obstacles
        .iter()
        .map(|o| {
            let room = o.center().distance(a).min(o.center().distance(b)) - o.r;
            (*o, (room * 0.5).clamp(0.0, OBSTACLE_MARGIN))
        })
        .collect();
    let problem = Problem {
        a,
        b,
        axis,
        normal: axis.perp(),
        length,
        lateral_span: (params.lateral_span_frac * length).max(params.min_lateral_span),
        field,
        obstacles,
        params,
        prop_speed,
    };
    let straight_eval = problem.evaluate(&straight);
    let straight_ok = straight_eval.penalties.is_clear();

    let dims = problem.dims();
    if dims == 0 {
        return if straight_ok {
            Ok(straight)
        } else {
            Err(PlanError::NoFeasiblePath {
                best: straight,
                penalties: straight_eval.penalties,
            })
        };
    }

    let mut rng = rng_from_seed(seed);
    let np = params.population;
    // along offsets in [-0.4, 0.4] spacings, lateral in [-1, 1] spans
    let bound = |d: usize| if d.is_multiple_of(2) { 0.4 } else { 1.0 };
    let mut pop: Vec<Vec<f64>> = (0..np)
        .map(|i| {
            (0..dims)
                .map(|d| if i == 0 { 0.0 } else { rng.random_range(-bound(d)..=bound(d)) })
                .collect()
        })
        .collect();
    let mut costs: Vec<f64> = pop.iter().map(|g| problem.evaluate(&problem.path(g)).cost).collect();

    for _ in 0..params.iterations {
        for i in 0..np {
            let (r1, r2, r3) = distinct_three(&mut rng, np, i);
            let forced = rng.random_range(0..dims);
            let trial: Vec<f64> = (0..dims)
                .map(|d| {
                    if d == forced || rng.random::<f64>() < params.crossover_rate {
                        let v = pop[r1][d] + params.mutation_factor * (pop[r2][d] - pop[r3][d]);
                        v.clamp(-bound(d), bound(d))
                    } else {
                        pop[i][d]
                    }
                })
                .collect();
            let c = problem.evaluate(&problem.path(&trial)).cost;
            if c <= costs[i] {
                pop[i] = trial;
                costs[i] = c;
            }
        }
    }

    // lowest cost, ties to the lowest index
    let best_idx = (0..np).fold(0, |best, i| if costs[i] < costs[best] { i } else { best });
    let best = problem.path(&pop[best_idx]);
    let best_eval = problem.evaluate(&best);
    if best_eval.penalties.is_clear() {
        if straight_ok && straight_eval.time <= best_eval.time {
            return Ok(straight);
        }
        return Ok(best);
    }
    if straight_ok {
        return Ok(straight);
    }
    Err(PlanError::NoFeasiblePath {
        best,
        penalties: best_eval.penalties,
    })
}

fn distinct_three(rng: &mut crate::seeding::Rng, n: usize, exclude: usize) -> (usize, usize, usize) {
    let mut pick = |taken: &[usize]| loop {
        let c = rng.random_range(0..n);
        if c != exclude && !taken.contains(&c) {
            return c;
        }
    };
    let a = pick(&[]);
    let b = pick(&[a]);
    let c = pick(&[a, b]);
    (a, b, c)
}

/// Planned paths between every pair of scenario indices.
///
/// One path is planned per unordered pair; the reverse direction reuses it
/// backwards unless that cannot be held against the current, in which case it
/// gets its own plan.
#[derive(Debug, Clone)]
pub struct PathNetwork {
    n: usize,
    paths: Vec<Option<Path>>,
    /// Pairs where the planner found no clean path and its best effort is used.
    pub fallbacks: usize,
}

impl PathNetwork {
    pub fn build(
        scenario: &Scenario,
        field: &CurrentField,
        params: &PathPlannerParams,
        prop_speed: f64,
        seed: u64,
    ) -> Result<Self, PlanError> {
        let n = scenario.node_count() + 2;
        let mut net = Self {
            n,
            paths: vec![None; n * n],
            fallbacks: 0,
        };
        for i in 0..n {
            for j in i + 1..n {
                let forward = net.plan(scenario, field, params, prop_speed, seed, i, j)?;
                let mut back = forward.clone();
                back.waypoints.reverse();
                let back = if i != 0 && path_time(&back, field, prop_speed).feasible {
                    back.with_nodes(j, i)
                } else if i != 0 {
                    net.plan(scenario, field, params, prop_speed, seed, j, i)?
                } else {
                    // nothing travels back into the start
                    back.with_nodes(j, i)
                };
                net.paths[i * n + j] = Some(forward);
                net.paths[j * n + i] = Some(back);
            }
        }
        Ok(net)
    }

    #[allow(clippy::too_many_arguments)]
    fn plan(
        &mut self,
        scenario: &Scenario,
        field: &CurrentField,
        params: &PathPlannerParams,
        prop_speed: f64,
        seed: u64,
        i: usize,
        j: usize,
    ) -> Result<Path, PlanError> {
        let pair_seed = derive_seed2(seed, stream::PATH, (i as u64) << 32 | j as u64);
        let (a, b) = (scenario.position(i), scenario.position(j));
        match plan_path(a, b, field, &scenario.obstacles, params, prop_speed, pair_seed) {
            Ok(p) => Ok(p.with_nodes(i, j)),
            Err(PlanError::NoFeasiblePath { best, .. }) => {
                self.fallbacks += 1;
                Ok(best.with_nodes(i, j))
            }
            Err(e) => Err(e),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn path(&self, i: usize, j: usize) -> Option<&Path> {
        self.paths.get(i * self.n + j).and_then(Option::as_ref)
    }

    /// Cost matrix whose transit entries are path times through `field`.
    /// Pairs without a path, or whose path cannot be held, fall back to the
    /// straight-line time.
    pub fn cost_matrix<C: Current + ?Sized>(&self, scenario: &Scenario, field: &C, prop_speed: f64) -> CostMatrix {
        let mut m = build_cost_matrix(scenario, prop_speed);
        for i in 0..self.n {
            for j in 0..self.n {
                if let Some(p) = self.path(i, j) {
                    let t = path_time(p, field, prop_speed);
                    if t.feasible {
                        m.set_transit(i, j, t.seconds);
                    }
                }
            }
        }
        m
    }
}
