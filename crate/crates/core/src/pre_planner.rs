//! Fleet sizing, giant-route segmentation and the k-means allocation baseline.

use crate::geometry::Point;
use crate::giant_route::{CostMatrix, GiantRoute};
use crate::route_optimizer::Route;
use crate::scenario::Scenario;
use crate::seeding::{derive_seed, rng_from_seed, stream};
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PrePlanError {
    #[error("time budget {tmax} s does not cover the depot legs ({overhead} s)")]
    BudgetBelowOverhead { tmax: f64, overhead: f64 },
    #[error("giant route time must be positive, got {0}")]
    NonPositiveTourTime(f64),
    #[error("cannot split {nodes} nodes into {segments} segments")]
    TooManySegments { segments: usize, nodes: usize },
    #[error("segmentation search space too large ({0} cut sets)")]
    SearchTooLarge(u128),
}

/// Depot legs of the giant route: start to its first node plus its last node to the end.
pub fn estimate_overhead(gr: &GiantRoute, matrix: &CostMatrix) -> f64 {
    match gr.interior() {
        [] => matrix.transit(0, matrix.end()),
        inner => matrix.transit(0, inner[0]) + matrix.transit(inner[inner.len() - 1], matrix.end()),
    }
}

/// Vehicles needed to cover the tour: ⌈(T0 − overhead) / (Tmax − overhead)⌉, at least one.
pub fn estimate_fleet_size(t0: f64, overhead: f64, tmax: f64) -> Result<usize, PrePlanError> {
    if !(tmax > overhead) {
        return Err(PrePlanError::BudgetBelowOverhead { tmax, overhead });
    }
    if !(t0 > 0.0) {
        return Err(PrePlanError::NonPositiveTourTime(t0));
    }
    let ratio = (t0 - overhead) / (tmax - overhead);
    // absorb rounding noise so that exact multiples do not round up
    Ok(((ratio - 1e-9).ceil() as usize).max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deviation {
    #[default]
    Absolute,
    Squared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentOptions {
    /// Count start-to-first and last-to-end legs in each segment's time.
    pub include_depot_legs: bool,
    pub deviation: Deviation,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self {
            include_depot_legs: true,
            deviation: Deviation::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    /// Segment k ends after the `cut_points[k]`-th node of the giant route.
    pub cut_points: Vec<usize>,
    pub segments: Vec<Vec<usize>>,
    pub times: Vec<f64>,
    pub objective: f64,
}

/// Largest number of cut sets the exact search will enumerate.
const MAX_CUT_SETS: u128 = 200_000_000;

/// Time of one segment of the node sequence.
pub fn segment_time(matrix: &CostMatrix, nodes: &[usize], include_depot_legs: bool) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let inner: f64 = nodes.windows(2).map(|w| matrix.entry(w[0], w[1])).sum::<f64>() + matrix.service(nodes[0]);
    if include_depot_legs {
        inner + matrix.transit(0, nodes[0]) + matrix.transit(nodes[nodes.len() - 1], matrix.end())
    } else {
        inner
    }
}

/// Deviation objective of a list of segment times.
pub fn segmentation_objective(times: &[f64], deviation: Deviation) -> f64 {
    let mean = times.iter().sum::<f64>() / times.len() as f64;
    times
        .iter()
        .map(|t| match deviation {
            Deviation::Absolute => (t - mean).abs(),
            Deviation::Squared => (t - mean).powi(2),
        })
        .sum()
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Splits the giant route into `m` consecutive segments with balanced times.
///
/// Exhaustive over all cut sets; segment times come from prefix sums so each
/// candidate costs O(m). The first minimum in lexicographic cut order wins.
pub fn segment_giant_route(
    gr: &GiantRoute,
    m: usize,
    matrix: &CostMatrix,
    options: SegmentOptions,
) -> Result<Segmentation, PrePlanError> {
    let nodes = gr.interior();
    let n = nodes.len();
    if m == 0 || m > n {
        return Err(PrePlanError::TooManySegments { segments: m, nodes: n });
    }
    let count = binomial((n - 1) as u128, (m - 1) as u128);
    if count > MAX_CUT_SETS {
        return Err(PrePlanError::SearchTooLarge(count));
    }

    // prefix[k] = service of nodes[0] + entries along nodes[0..=k]
    let mut prefix = vec![0.0; n];
    prefix[0] = matrix.service(nodes[0]);
    for k in 1..n {
        prefix[k] = prefix[k - 1] + matrix.entry(nodes[k - 1], nodes[k]);
    }
    let time = |lo: usize, hi: usize| -> f64 {
        // nodes[lo..hi], hi exclusive
        let mut t = prefix[hi - 1] - prefix[lo] + matrix.service(nodes[lo]);
        if options.include_depot_legs {
            t += matrix.transit(0, nodes[lo]) + matrix.transit(nodes[hi - 1], matrix.end());
        }
        t
    };

    let mut cuts: Vec<usize> = (1..m).collect();
    let mut times = vec![0.0; m];
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let mut lo = 0;
        for (k, &c) in cuts.iter().chain(std::iter::once(&n)).enumerate() {
            times[k] = time(lo, c);
            lo = c;
        }
        let obj = segmentation_objective(&times, options.deviation);
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, cuts.clone()));
        }
        if !next_combination(&mut cuts, n) {
            break;
        }
    }
    let (objective, cut_points) = best.expect("at least one cut set");
    Ok(build_segmentation(nodes, cut_points, objective, &time))
}

fn build_segmentation(nodes: &[usize], cut_points: Vec<usize>, objective: f64, time: &dyn Fn(usize, usize) -> f64) -> Segmentation {
    let mut segments = Vec::with_capacity(cut_points.len() + 1);
    let mut times = Vec::with_capacity(cut_points.len() + 1);
    let mut lo = 0;
    for &c in cut_points.iter().chain(std::iter::once(&nodes.len())) {
        segments.push(nodes[lo..c].to_vec());
        times.push(time(lo, c));
        lo = c;
    }
    Segmentation {
        cut_points,
        segments,
        times,
        objective,
    }
}

/// Advances strictly increasing `cuts` within `1..n` to the next combination.
fn next_combination(cuts: &mut [usize], n: usize) -> bool {
    let k = cuts.len();
    for i in (0..k).rev() {
        // largest value position i may take
        if cuts[i] < n - (k - i) {
            cuts[i] += 1;
            for j in i + 1..k {
                cuts[j] = cuts[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Node sets assigned to vehicles, before ordering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub clusters: Vec<Vec<usize>>,
}

impl From<&Segmentation> for Allocation {
    fn from(s: &Segmentation) -> Self {
        Self {
            clusters: s.segments.clone(),
        }
    }
}

/// Lloyd's k-means on node positions with k-means++ seeding.
/// Cluster members are sorted by node id; empty clusters are possible only when
/// there are fewer distinct positions than clusters.
pub fn kmeans_allocation(scenario: &Scenario, m: usize, seed: u64) -> Allocation {
    let m = m.max(1);
    let pts: Vec<Point> = scenario.nodes.iter().map(|n| n.position()).collect();
    let ids: Vec<usize> = scenario.nodes.iter().map(|n| n.id).collect();
    if pts.is_empty() {
        return Allocation { clusters: vec![Vec::new(); m] };
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::KMEANS));

    let mut centers = vec![pts[rng.random_range(0..pts.len())]];
    while centers.len() < m {
        let d2: Vec<f64> = pts
            .iter()
            .map(|p| centers.iter().map(|c| p.distance(*c).powi(2)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            centers.push(pts[rng.random_range(0..pts.len())]);
            continue;
        }
        let mut r = rng.random::<f64>() * total;
        let mut pick = pts.len() - 1;
        for (i, d) in d2.iter().enumerate() {
            if r < *d {
                pick = i;
                break;
            }
            r -= d;
        }
        centers.push(pts[pick]);
    }

    let nearest = |p: Point, centers: &[Point]| -> usize {
        (0..centers.len())
            .min_by(|&a, &b| p.distance(centers[a]).total_cmp(&p.distance(centers[b])).then(a.cmp(&b)))
            .expect("centers")
    };
    let mut assign: Vec<usize> = pts.iter().map(|p| nearest(*p, &centers)).collect();
    for _ in 0..300 {
        for (k, c) in centers.iter_mut().enumerate() {
            let members: Vec<Point> = pts.iter().zip(&assign).filter(|(_, a)| **a == k).map(|(p, _)| *p).collect();
            if !members.is_empty() {
                let sum = members.iter().fold(Point::ZERO, |acc, p| acc + *p);
                *c = sum * (1.0 / members.len() as f64);
            }
        }
        let next: Vec<usize> = pts.iter().map(|p| nearest(*p, &centers)).collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    let mut clusters = vec![Vec::new(); m];
    for (id, k) in ids.iter().zip(&assign) {
        clusters[*k].push(*id);
    }
    for c in &mut clusters {
        c.sort_unstable();
    }
    Allocation { clusters }
}

/// Vehicle routes and nodes left unassigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetPlan {
    pub m: usize,
    pub tmax: f64,
    pub routes: Vec<Route>,
    pub idle_nodes: Vec<usize>,
}

impl FleetPlan {
    pub fn planned_value(&self) -> f64 {
        self.routes.iter().map(|r| r.expected_value).sum()
    }

    /// Planned share of the total data amount.
    pub fn expected_completion(&self, matrix: &CostMatrix) -> f64 {
        let total = matrix.total_rho();
        if total > 0.0 {
            self.planned_value() / total
        } else {
            1.0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }
}
