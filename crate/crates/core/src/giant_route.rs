//! Travel-cost matrix and the single-vehicle tour through every node.

use crate::geometry::Point;
use crate::scenario::{service_time, Scenario};
use crate::seeding::{rng_from_seed, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

/// Travel and service times between all mission points.
///
/// Index 0 is the start, `size() - 1` the end, sensor nodes in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    n: usize,
    transit: Vec<f64>,
    service: Vec<f64>,
    rho: Vec<f64>,
}

impl CostMatrix {
    /// `transit[i][j]` in seconds; `service` and `rho` per index (zero at start and end).
    pub fn from_parts(transit: Vec<Vec<f64>>, service: Vec<f64>, rho: Vec<f64>) -> Self {
        let n = transit.len();
        assert!(n >= 2, "need at least a start and an end");
        assert!(transit.iter().all(|row| row.len() == n));
        assert_eq!(service.len(), n);
        assert_eq!(rho.len(), n);
        Self {
            n,
            transit: transit.into_iter().flatten().collect(),
            service,
            rho,
        }
    }

    /// Straight-line transit at `speed`.
    pub fn from_positions(points: &[Point], service: Vec<f64>, rho: Vec<f64>, speed: f64) -> Self {
        let transit = points
            .iter()
            .map(|a| points.iter().map(|b| a.distance(*b) / speed).collect())
            .collect();
        Self::from_parts(transit, service, rho)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn end(&self) -> usize {
        self.n - 1
    }

    /// Sensor node indices, `1..size()-1`.
    pub fn nodes(&self) -> std::ops::Range<usize> {
        1..self.n - 1
    }

    #[inline]
    pub fn transit(&self, i: usize, j: usize) -> f64 {
        self.transit[i * self.n + j]
    }

    pub fn set_transit(&mut self, i: usize, j: usize, seconds: f64) {
        self.transit[i * self.n + j] = seconds;
    }

    #[inline]
    pub fn service(&self, j: usize) -> f64 {
        self.service[j]
    }

    #[inline]
    pub fn rho(&self, j: usize) -> f64 {
        self.rho[j]
    }

    /// Transit plus service at the destination. Arcs into the start or out of
    /// the end are prohibitive.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if j == 0 || i == self.n - 1 {
            f64::INFINITY
        } else {
            self.transit(i, j) + self.service[j]
        }
    }

    /// Sum of entries along a full index sequence.
    pub fn sequence_time(&self, seq: &[usize]) -> f64 {
        seq.windows(2).map(|w| self.entry(w[0], w[1])).sum()
    }

    /// Time of start → `nodes` → end.
    pub fn route_time(&self, nodes: &[usize]) -> f64 {
        self.route_time_from(0, nodes)
    }

    /// Time of `origin` → `nodes` → end.
    pub fn route_time_from(&self, origin: usize, nodes: &[usize]) -> f64 {
        let mut prev = origin;
        let mut total = 0.0;
        for &j in nodes {
            total += self.entry(prev, j);
            prev = j;
        }
        total + self.entry(prev, self.end())
    }

    pub fn value(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&j| self.rho[j]).sum()
    }

    pub fn total_rho(&self) -> f64 {
        self.rho.iter().sum()
    }
}

/// Straight-line cost matrix of a scenario at the given propulsion speed.
pub fn build_cost_matrix(scenario: &Scenario, prop_speed: f64) -> CostMatrix {
    let n = scenario.node_count() + 2;
    let points: Vec<Point> = (0..n).map(|i| scenario.position(i)).collect();
    let mut service = vec![0.0; n];
    let mut rho = vec![0.0; n];
    for node in &scenario.nodes {
        service[node.id] = service_time(node, scenario);
        rho[node.id] = node.rho;
    }
    CostMatrix::from_positions(&points, service, rho, prop_speed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GiantRoute {
    /// Every matrix index once, from the start (0) to the end.
    pub order: Vec<usize>,
    pub total_time: f64,
}

impl GiantRoute {
    /// Sensor nodes in visiting order.
    pub fn interior(&self) -> &[usize] {
        &self.order[1..self.order.len() - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub elitism_frac: f64,
    pub mutation_rate: f64,
    pub tournament: usize,
    /// Stop after this many generations without improvement.
    pub stall_generations: usize,
}

impl Default for GaParams {
    fn default() -> Self {
        Self {
            population: 200,
            generations: 2000,
            elitism_frac: 0.05,
            mutation_rate: 0.2,
            tournament: 3,
            stall_generations: 100,
        }
    }
}

/// GA over interior-node permutations. Deterministic per seed.
pub fn solve_giant_route(matrix: &CostMatrix, params: &GaParams, seed: u64) -> GiantRoute {
    solve_giant_route_traced(matrix, params, seed).0
}

/// As [`solve_giant_route`], also returning the best cost after each generation.
pub fn solve_giant_route_traced(matrix: &CostMatrix, params: &GaParams, seed: u64) -> (GiantRoute, Vec<f64>) {
    let interior: Vec<usize> = matrix.nodes().collect();
    let close = |tour: Vec<usize>| {
        let total_time = matrix.route_time(&tour);
        let mut order = Vec::with_capacity(tour.len() + 2);
        order.push(0);
        order.extend(tour);
        order.push(matrix.end());
        GiantRoute { order, total_time }
    };
    if interior.len() <= 1 {
        return (close(interior), Vec::new());
    }

    let mut rng = rng_from_seed(seed);
    let np = params.population.max(4);
    let nn = nearest_neighbor(matrix);
    let mut polished = nn.clone();
    local_search(matrix, &mut polished);

    let mut pop: Vec<Vec<usize>> = Vec::with_capacity(np);
    pop.push(nn);
    pop.push(polished);
    while pop.len() < np {
        let mut t = interior.clone();
        t.shuffle(&mut rng);
        pop.push(t);
    }
    let mut costs: Vec<f64> = pop.iter().map(|t| matrix.route_time(t)).collect();
    let elite = ((params.elitism_frac * np as f64).ceil() as usize).clamp(1, np);

    let mut history = Vec::with_capacity(params.generations);
    let mut best_cost = f64::INFINITY;
    let mut stall = 0;
    for _ in 0..params.generations {
        let ranked = rank(&costs);
        let mut next: Vec<Vec<usize>> = ranked[..elite].iter().map(|&i| pop[i].clone()).collect();
        while next.len() < np {
            let a = tournament(&mut rng, &costs, params.tournament);
            let b = tournament(&mut rng, &costs, params.tournament);
            let mut child = order_crossover(&mut rng, &pop[a], &pop[b]);
            if rng.random::<f64>() < params.mutation_rate {
                mutate(&mut rng, &mut child);
            }
            local_search(matrix, &mut child);
            next.push(child);
        }
        pop = next;
        costs = pop.iter().map(|t| matrix.route_time(t)).collect();

        let lead = rank(&costs)[0];
        if costs[lead] < best_cost - 1e-9 {
            best_cost = costs[lead];
            stall = 0;
        } else {
            stall += 1;
        }
        history.push(best_cost);
        if stall >= params.stall_generations {
            break;
        }
    }
    let lead = rank(&costs)[0];
    (close(pop[lead].clone()), history)
}

/// Indices sorted by cost, ties by index.
fn rank(costs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b)));
    idx
}

fn tournament(rng: &mut Rng, costs: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..costs.len());
    for _ in 1..size.max(1) {
        let c = rng.random_range(0..costs.len());
        if costs[c] < costs[best] || (costs[c] == costs[best] && c < best) {
            best = c;
        }
    }
    best
}

/// Order crossover: keep a slice of `a`, fill the rest in `b`'s order.
pub(crate) fn order_crossover(rng: &mut Rng, a: &[usize], b: &[usize]) -> Vec<usize> {
    let n = a.len();
    if n < 2 {
        return a.to_vec();
    }
    let mut i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n);
    if i > j {
        std::mem::swap(&mut i, &mut j);
    }
    let kept = &a[i..=j];
    let mut rest = b.iter().copied().filter(|g| !kept.contains(g));
    let mut child = Vec::with_capacity(n);
    child.extend(rest.by_ref().take(i));
    child.extend_from_slice(kept);
    child.extend(rest);
    child
}

fn mutate(rng: &mut Rng, tour: &mut [usize]) {
    let n = tour.len();
    let i = rng.random_range(0..n);
    let j = rng.random_range(0..n);
    if rng.random::<bool>() {
        tour.swap(i, j);
    } else {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        tour[lo..=hi].reverse();
    }
}

fn nearest_neighbor(matrix: &CostMatrix) -> Vec<usize> {
    let mut left: Vec<usize> = matrix.nodes().collect();
    let mut tour = Vec::with_capacity(left.len());
    let mut at = 0;
    while !left.is_empty() {
        let k = (0..left.len())
            .min_by(|&a, &b| matrix.transit(at, left[a]).total_cmp(&matrix.transit(at, left[b])))
            .expect("nonempty");
        at = left.remove(k);
        tour.push(at);
    }
    tour
}

/// 2-opt and or-opt moves on the open tour until no move improves it.
pub(crate) fn local_search(matrix: &CostMatrix, tour: &mut Vec<usize>) {
    if tour.len() < 2 {
        return;
    }
    if is_symmetric(matrix) {
        let mut seq = Vec::with_capacity(tour.len() + 2);
        seq.push(0);
        seq.extend_from_slice(tour);
        seq.push(matrix.end());
        while two_opt_fast(matrix, &mut seq) | or_opt_fast(matrix, &mut seq) {}
        tour.copy_from_slice(&seq[1..seq.len() - 1]);
        return;
    }
    let mut current = matrix.route_time(tour);
    loop {
        let before = current;
        two_opt(matrix, tour, &mut current);
        or_opt(matrix, tour, &mut current);
        if current >= before - 1e-9 {
            break;
        }
    }
}

fn is_symmetric(matrix: &CostMatrix) -> bool {
    let n = matrix.size();
    (0..n).all(|i| (i + 1..n).all(|j| matrix.transit(i, j) == matrix.transit(j, i)))
}

/// Segment reversal on the full sequence with O(1) gain; services are order
/// independent and transit symmetric, so only the two boundary arcs change.
fn two_opt_fast(matrix: &CostMatrix, seq: &mut [usize]) -> bool {
    let d = |a: usize, b: usize| matrix.transit(a, b);
    let last = seq.len() - 2;
    let mut any = false;
    let mut improved = true;
    while improved {
        improved = false;
        for i in 1..last {
            for j in i + 1..=last {
                let gain = d(seq[i - 1], seq[i]) + d(seq[j], seq[j + 1]) - d(seq[i - 1], seq[j]) - d(seq[i], seq[j + 1]);
                if gain > 1e-9 {
                    seq[i..=j].reverse();
                    improved = true;
                    any = true;
                }
            }
        }
    }
    any
}

/// Moves chains of one to three nodes elsewhere, possibly reversed.
fn or_opt_fast(matrix: &CostMatrix, seq: &mut Vec<usize>) -> bool {
    let d = |a: usize, b: usize| matrix.transit(a, b);
    let mut any = false;
    for len in 1..=3 {
        let mut i = 1;
        while i + len < seq.len() {
            let (a, first, last, b) = (seq[i - 1], seq[i], seq[i + len - 1], seq[i + len]);
            let removal = d(a, first) + d(last, b) - d(a, b);
            let mut best: Option<(f64, usize, bool)> = None;
            for k in 0..seq.len() - 1 {
                if k + 1 >= i && k < i + len {
                    continue;
                }
                let (p, q) = (seq[k], seq[k + 1]);
                for reversed in [false, true] {
                    let (h, t) = if reversed { (last, first) } else { (first, last) };
                    let gain = removal - (d(p, h) + d(t, q) - d(p, q));
                    if gain > 1e-9 && best.is_none_or(|(g, _, _)| gain > g) {
                        best = Some((gain, k, reversed));
                    }
                }
            }
            if let Some((_, k, reversed)) = best {
                let mut chain: Vec<usize> = seq.drain(i..i + len).collect();
                if reversed {
                    chain.reverse();
                }
                let at = if k < i { k + 1 } else { k + 1 - len };
                seq.splice(at..at, chain);
                any = true;
            } else {
                i += 1;
            }
        }
    }
    any
}

fn two_opt(matrix: &CostMatrix, tour: &mut [usize], current: &mut f64) {
    let n = tour.len();
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n {
            for j in i + 1..n {
                tour[i..=j].reverse();
                let t = matrix.route_time(tour);
                if t < *current - 1e-9 {
                    *current = t;
                    improved = true;
                } else {
                    tour[i..=j].reverse();
                }
            }
        }
    }
}

fn or_opt(matrix: &CostMatrix, tour: &mut Vec<usize>, current: &mut f64) {
    let n = tour.len();
    for len in 1..=3.min(n.saturating_sub(1)) {
        let mut i = 0;
        while i + len <= tour.len() {
            let seg: Vec<usize> = tour[i..i + len].to_vec();
            let mut rest: Vec<usize> = tour[..i].to_vec();
            rest.extend_from_slice(&tour[i + len..]);
            let mut best: Option<(f64, Vec<usize>)> = None;
            for pos in 0..=rest.len() {
                if pos == i {
                    continue;
                }
                let mut cand = rest.clone();
                cand.splice(pos..pos, seg.iter().copied());
                let t = matrix.route_time(&cand);
                if t < *current - 1e-9 && best.as_ref().is_none_or(|(bt, _)| t < *bt) {
                    best = Some((t, cand));
                }
            }
            if let Some((t, cand)) = best {
                *tour = cand;
                *current = t;
            }
            i += 1;
        }
    }
}
