//! Auction-based assignment of idle nodes among vehicles.
//!
//! Agents bid on the node that maximizes value minus current price, raising
//! the price by their profit margin over the second-best node plus a minimum
//! increment. When prices stop moving, a node with a standing bid is awarded
//! to its top bidder; the auction then restarts with fresh valuations, since winning a
//! node changes the winner's route and remaining budget.

use serde::{Deserialize, Serialize};

/// What a vehicle reports about itself when an auction opens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentView {
    pub vehicle: usize,
    /// Matrix index the vehicle is at, or is committed to reach next.
    pub position: usize,
    /// Mission time at which it is ready to leave `position`, s.
    pub elapsed: f64,
    /// Nodes still to visit after `position`.
    pub route: Vec<usize>,
    pub tmax: f64,
}

impl AgentView {
    pub fn remaining_budget(&self) -> f64 {
        (self.tmax - self.elapsed).max(0.0)
    }
}

/// How much each agent values each idle node, and what happens on an award.
pub trait Valuation {
    fn agent_count(&self) -> usize;
    /// Insertion ratio ψ of `node` for `agent`; zero when it cannot be taken.
    fn value(&self, agent: usize, node: usize) -> f64;
    /// Commits `node` to `agent`; later valuations see the change.
    fn award(&mut self, agent: usize, node: usize);
}

/// Target of one agent: `(index into the idle list, profit)`.
///
/// Nodes with ψ ≤ 0 are never targets; `None` when no node has positive
/// profit. Ties go to the lower index.
pub fn compute_bid_target(values: &[f64], prices: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, (&v, &p)) in values.iter().zip(prices).enumerate() {
        if v <= 0.0 {
            continue;
        }
        let profit = v - p;
        if profit > 0.0 && best.is_none_or(|(_, b)| profit > b) {
            best = Some((k, profit));
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuctionEvent {
    Bid { round: usize, agent: usize, node: usize, amount: f64 },
    Award { round: usize, agent: usize, node: usize, amount: f64, value: f64 },
    Reject { round: usize, node: usize },
}

/// Bidding state between awards.
#[derive(Debug, Clone, PartialEq)]
pub struct AuctionState {
    pub idle: Vec<usize>,
    /// `bids[agent][k]` for idle node `idle[k]`.
    pub bids: Vec<Vec<f64>>,
    pub epsilon_min: f64,
    pub round: usize,
}

impl AuctionState {
    pub fn new(idle: Vec<usize>, agents: usize, epsilon_min: f64) -> Self {
        let n = idle.len();
        Self {
            idle,
            bids: vec![vec![0.0; n]; agents],
            epsilon_min,
            round: 0,
        }
    }

    fn reset_bids(&mut self) {
        let n = self.idle.len();
        for b in &mut self.bids {
            b.clear();
            b.resize(n, 0.0);
        }
    }

    /// Highest bid on idle node `k` and its holder (lowest agent id on ties).
    pub fn top_bid(&self, k: usize) -> (f64, Option<usize>) {
        let mut best = (0.0, None);
        for (a, b) in self.bids.iter().enumerate() {
            if b[k] > best.0 {
                best = (b[k], Some(a));
            }
        }
        best
    }

    pub fn prices(&self) -> Vec<f64> {
        (0..self.idle.len()).map(|k| self.top_bid(k).0).collect()
    }
}

/// Outcome of one bidding round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub raised: bool,
    /// `(agent, node, winning bid, value at award)`.
    pub award: Option<(usize, usize, f64, f64)>,
}

/// One synchronous round. Agents currently holding a top bid sit out; every
/// other agent with a positive-profit target raises that node's price by
/// (best profit − max(second profit, 0)) + ε_min. Once a round passes in
/// which no price rose, the lowest-id node carrying a positive bid is awarded.
pub fn auction_round<V: Valuation + ?Sized>(
    state: &mut AuctionState,
    valuation: &mut V,
    events: &mut Vec<AuctionEvent>,
) -> RoundResult {
    state.round += 1;
    let n = state.idle.len();
    let agents = valuation.agent_count();
    let prices = state.prices();
    let holders: Vec<Option<usize>> = (0..n).map(|k| state.top_bid(k).1).collect();

    let mut new_bids: Vec<(usize, usize, f64)> = Vec::new();
    for a in 0..agents {
        if holders.contains(&Some(a)) {
            continue;
        }
        let values: Vec<f64> = state.idle.iter().map(|&j| valuation.value(a, j)).collect();
        let Some((k, best)) = compute_bid_target(&values, &prices) else {
            continue;
        };
        let second = (0..n)
            .filter(|&i| i != k && values[i] > 0.0)
            .map(|i| values[i] - prices[i])
            .fold(0.0, f64::max);
        let increment = (best - second + state.epsilon_min).max(state.epsilon_min);
        new_bids.push((a, k, prices[k] + increment));
    }

    for &(a, k, amount) in &new_bids {
        state.bids[a][k] = amount;
        events.push(AuctionEvent::Bid {
            round: state.round,
            agent: a,
            node: state.idle[k],
            amount,
        });
    }

    let mut award = None;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| state.idle[k]);
    for k in order {
        if !new_bids.is_empty() {
            break;
        }
        if let (amount, Some(agent)) = state.top_bid(k) {
            let node = state.idle[k];
            let value = valuation.value(agent, node);
            award = Some((agent, node, amount, value));
            break;
        }
    }
    RoundResult {
        raised: !new_bids.is_empty(),
        award,
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuctionOutcome {
    /// `(node, agent)` in award order.
    pub assignments: Vec<(usize, usize)>,
    /// Valuation of each award at the moment it was made.
    pub values: Vec<f64>,
    pub unassigned: Vec<usize>,
    pub rounds: usize,
    pub events: Vec<AuctionEvent>,
}

impl AuctionOutcome {
    pub fn total_value(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Runs rounds until every idle node is placed or a round passes with no bid
/// and no award. After each award the winner's valuations are refreshed and
/// bidding restarts from zero.
pub fn run_auction<V: Valuation + ?Sized>(idle: &[usize], valuation: &mut V, epsilon_min: f64) -> AuctionOutcome {
    assert!(epsilon_min > 0.0, "minimum increment must be positive");
    let mut state = AuctionState::new(idle.to_vec(), valuation.agent_count(), epsilon_min);
    let mut out = AuctionOutcome::default();
    while !state.idle.is_empty() {
        let result = auction_round(&mut state, valuation, &mut out.events);
        match result.award {
            Some((agent, node, amount, value)) => {
                valuation.award(agent, node);
                out.events.push(AuctionEvent::Award {
                    round: state.round,
                    agent,
                    node,
                    amount,
                    value,
                });
                out.assignments.push((node, agent));
                out.values.push(value);
                state.idle.retain(|&j| j != node);
                state.reset_bids();
            }
            None if !result.raised => break,
            None => {}
        }
    }
    for &node in &state.idle {
        out.events.push(AuctionEvent::Reject { round: state.round, node });
    }
    out.unassigned = state.idle;
    out.rounds = state.round;
    out
}

/// Fixed ψ table where each agent can take a limited number of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TableValuation {
    /// `psi[agent][node]`
    pub psi: Vec<Vec<f64>>,
    pub capacity: Vec<usize>,
}

impl TableValuation {
    pub fn new(psi: Vec<Vec<f64>>, capacity: Vec<usize>) -> Self {
        assert_eq!(psi.len(), capacity.len());
        Self { psi, capacity }
    }
}

impl Valuation for TableValuation {
    fn agent_count(&self) -> usize {
        self.psi.len()
    }

    fn value(&self, agent: usize, node: usize) -> f64 {
        if self.capacity[agent] == 0 {
            0.0
        } else {
            self.psi[agent][node]
        }
    }

    fn award(&mut self, agent: usize, _node: usize) {
        self.capacity[agent] = self.capacity[agent].saturating_sub(1);
    }
}
