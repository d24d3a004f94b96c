//! Synthetic ocean current built from superposed Lamb vortexes.
//!
//! A single vortex with circulation `gamma` and core radius `delta` centred at
//! `r0` induces the purely tangential velocity
//!
//! ```text
//! v(r) = gamma / (2π d²) · (1 − exp(−d²/δ²)) · (−(y − y0), x − x0),   d = |r − r0|
//! ```
//!
//! which is finite everywhere and tends to zero at the centre. The field is the
//! vector sum over all vortexes.

use crate::geometry::Point;
use crate::seeding::rng_from_seed;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Below this distance from a centre the velocity is reported as exactly zero.
const CENTER_CUTOFF: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambVortex {
    pub x: f64,
    pub y: f64,
    /// Circulation strength, m²/s (sign gives the sense of rotation).
    pub gamma: f64,
    /// Core radius, m.
    pub delta: f64,
}

impl LambVortex {
    pub fn new(center: Point, gamma: f64, delta: f64) -> Self {
        Self {
            x: center.x,
            y: center.y,
            gamma,
            delta,
        }
    }

    pub fn center(&self) -> Point {
        Point::new(self.x, self.y)
    }

    pub fn is_valid(&self) -> bool {
        self.delta > 0.0 && self.delta.is_finite() && self.gamma.is_finite() && self.center().is_finite()
    }
}

/// Velocity induced at `pos` by one vortex.
pub fn vortex_velocity(pos: Point, vortex: &LambVortex) -> Point {
    let rel = pos - vortex.center();
    let d2 = rel.norm_sq();
    if d2 < CENTER_CUTOFF * CENTER_CUTOFF {
        return Point::ZERO;
    }
    let x = d2 / (vortex.delta * vortex.delta);
    // 1 - exp(-x) without cancellation for small x
    let core = -(-x).exp_m1();
    let scale = vortex.gamma * core / (2.0 * PI * d2);
    rel.perp() * scale
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CurrentField {
    pub vortexes: Vec<LambVortex>,
}

impl CurrentField {
    pub fn new(vortexes: Vec<LambVortex>) -> Self {
        Self { vortexes }
    }

    pub fn calm() -> Self {
        Self::default()
    }

    pub fn velocity(&self, pos: Point) -> Point {
        field_velocity(pos, self)
    }

    pub fn is_calm(&self) -> bool {
        self.vortexes.iter().all(|v| v.gamma == 0.0)
    }
}

/// Sum of all vortex contributions at `pos`.
pub fn field_velocity(pos: Point, field: &CurrentField) -> Point {
    field
        .vortexes
        .iter()
        .fold(Point::ZERO, |acc, v| acc + vortex_velocity(pos, v))
}

/// Scales of the zero-mean noise applied when realizing the true field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    /// Std of the relative change in circulation.
    pub gamma_scale: f64,
    /// Std of the relative change in core radius.
    pub delta_scale: f64,
    /// Std of the centre displacement per axis, m.
    pub center_jitter: f64,
}

impl Perturbation {
    pub const NONE: Perturbation = Perturbation {
        gamma_scale: 0.0,
        delta_scale: 0.0,
        center_jitter: 0.0,
    };
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            gamma_scale: 0.2,
            delta_scale: 0.1,
            center_jitter: 200.0,
        }
    }
}

/// Smallest multiplier applied to a core radius, keeps δ strictly positive.
const MIN_DELTA_FACTOR: f64 = 0.05;

/// Draws the "true" field the vehicles will actually meet from the believed one.
///
/// Every vortex gets `Γ·(1+ε_Γ)`, `δ·(1+ε_δ)` and a jittered centre. A scale of
/// zero leaves the matching parameter untouched, so `Perturbation::NONE`
/// returns the input unchanged.
pub fn realize_true_field(field: &CurrentField, perturbation: &Perturbation, seed: u64) -> CurrentField {
    let mut rng = rng_from_seed(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let vortexes = field
        .vortexes
        .iter()
        .map(|v| {
            // draw all four values unconditionally so streams line up across scale settings
            let eg: f64 = std_normal.sample(&mut rng);
            let ed: f64 = std_normal.sample(&mut rng);
            let ex: f64 = std_normal.sample(&mut rng);
            let ey: f64 = std_normal.sample(&mut rng);
            let mut out = *v;
            if perturbation.gamma_scale > 0.0 {
                out.gamma = v.gamma * (1.0 + perturbation.gamma_scale * eg);
            }
            if perturbation.delta_scale > 0.0 {
                out.delta = v.delta * (1.0 + perturbation.delta_scale * ed).max(MIN_DELTA_FACTOR);
            }
            if perturbation.center_jitter > 0.0 {
                out.x = v.x + perturbation.center_jitter * ex;
                out.y = v.y + perturbation.center_jitter * ey;
            }
            out
        })
        .collect();
    CurrentField { vortexes }
}
