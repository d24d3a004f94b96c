//! SVG pictures of a scenario, optionally with planned or flown routes.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geometry::Point;
use crate::mission_sim::{digest, EventKind, MissionLog};
use crate::pre_planner::FleetPlan;
use crate::scenario::Scenario;

const WIDTH: f64 = 800.0;
const PAD: f64 = 20.0;
const QUIVER: usize = 25;
const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f"];

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("plan route {vehicle} visits node {node}, which the scenario does not have")]
    PlanNode { vehicle: usize, node: usize },
    #[error("log event refers to node {node}, which the scenario does not have")]
    LogNode { node: usize },
    #[error("log was recorded on scenario {log}, not {scenario}")]
    ScenarioMismatch { log: String, scenario: String },
}

struct Frame {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl Frame {
    fn px(&self, p: Point) -> (f64, f64) {
        (PAD + (p.x - self.x0) * self.scale, PAD + (self.y1 - p.y) * self.scale)
    }
}

fn check_inputs(scenario: &Scenario, plan: Option<&FleetPlan>, log: Option<&MissionLog>) -> Result<(), RenderError> {
    let n = scenario.node_count();
    if let Some(plan) = plan {
        for r in &plan.routes {
            if let Some(&node) = r.nodes.iter().find(|&&j| j == 0 || j > n) {
                return Err(RenderError::PlanNode { vehicle: r.vehicle, node });
            }
        }
    }
    if let Some(log) = log {
        let expected = digest(scenario);
        if log.scenario != expected {
            return Err(RenderError::ScenarioMismatch {
                log: log.scenario.clone(),
                scenario: expected,
            });
        }
        if let Some(node) = log.events.iter().filter_map(|e| e.node).find(|&j| j > n + 1) {
            return Err(RenderError::LogNode { node });
        }
    }
    Ok(())
}

/// Region, obstacles, a current quiver, nodes sized by data amount, and routes.
///
/// With a log, routes are the flown visit sequences; discarded nodes that
/// nobody collected get a red cross and nodes won at auction a green ring.
/// Without one, the plan's routes are drawn.
pub fn render_svg(scenario: &Scenario, plan: Option<&FleetPlan>, log: Option<&MissionLog>) -> Result<String, RenderError> {
    check_inputs(scenario, plan, log)?;
    let r = scenario.region;
    let span = (r.x_max - r.x_min).max(r.y_max - r.y_min);
    let f = Frame {
        x0: r.x_min,
        y1: r.y_max,
        scale: (WIDTH - 2.0 * PAD) / span,
    };
    let w = (r.x_max - r.x_min) * f.scale + 2.0 * PAD;
    let h = (r.y_max - r.y_min) * f.scale + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.1} {h:.1}">"#
    );
    let (rx, ry) = f.px(Point::new(r.x_min, r.y_max));
    let _ = writeln!(
        s,
        r##"<rect class="region" x="{rx:.1}" y="{ry:.1}" width="{:.1}" height="{:.1}" fill="#f4f8fb" stroke="#333"/>"##,
        (r.x_max - r.x_min) * f.scale,
        (r.y_max - r.y_min) * f.scale
    );

    draw_quiver(&mut s, scenario, &f);
    s.push_str("<g class=\"obstacles\">\n");
    for o in &scenario.obstacles {
        let (cx, cy) = f.px(o.center());
        let _ = writeln!(
            s,
            r##"<circle class="obstacle" cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="#999" fill-opacity="0.6"/>"##,
            o.r * f.scale
        );
    }
    s.push_str("</g>\n");

    let routes: Vec<Vec<usize>> = match (log, plan) {
        (Some(log), _) => log.vehicles.iter().map(|v| v.collected.clone()).collect(),
        (None, Some(plan)) => plan.routes.iter().map(|r| r.nodes.clone()).collect(),
        (None, None) => Vec::new(),
    };
    s.push_str("<g class=\"routes\">\n");
    let end = scenario.end_index();
    for (v, nodes) in routes.iter().enumerate() {
        let pts: Vec<String> = std::iter::once(0)
            .chain(nodes.iter().copied())
            .chain(std::iter::once(end))
            .map(|j| {
                let (x, y) = f.px(scenario.position(j));
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="route" data-vehicle="{v}" points="{}" fill="none" stroke="{}" stroke-width="2"/>"#,
            pts.join(" "),
            PALETTE[v % PALETTE.len()]
        );
    }
    s.push_str("</g>\n");

    s.push_str("<g class=\"nodes\">\n");
    for node in &scenario.nodes {
        let (cx, cy) = f.px(node.position());
        let _ = writeln!(
            s,
            r##"<circle class="node" data-id="{}" cx="{cx:.1}" cy="{cy:.1}" r="{:.1}" fill="#2a6f97"/>"##,
            node.id,
            2.0 + 4.0 * node.rho
        );
    }
    for (label, p, colour) in [("start", scenario.start, "#2ca02c"), ("end", scenario.end, "#d62728")] {
        let (x, y) = f.px(p);
        let _ = writeln!(
            s,
            r#"<rect class="{label}" x="{:.1}" y="{:.1}" width="10" height="10" fill="{colour}"/>"#,
            x - 5.0,
            y - 5.0
        );
    }
    s.push_str("</g>\n");

    if let Some(log) = log {
        draw_markers(&mut s, scenario, log, &f);
    }
    s.push_str("</svg>\n");
    Ok(s)
}

fn draw_quiver(s: &mut String, scenario: &Scenario, f: &Frame) {
    let r = scenario.region;
    let field = scenario.field();
    let samples: Vec<(Point, Point)> = (0..QUIVER)
        .flat_map(|i| (0..QUIVER).map(move |k| (i, k)))
        .map(|(i, k)| {
            let p = Point::new(
                r.x_min + (i as f64 + 0.5) / QUIVER as f64 * (r.x_max - r.x_min),
                r.y_min + (k as f64 + 0.5) / QUIVER as f64 * (r.y_max - r.y_min),
            );
            (p, field.velocity(p))
        })
        .collect();
    let vmax = samples.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
    let cell = (WIDTH - 2.0 * PAD) / QUIVER as f64;
    s.push_str("<g class=\"quiver\" stroke=\"#7fa7c9\" stroke-width=\"1\">\n");
    for (p, v) in samples {
        let (x, y) = f.px(p);
        let k = if vmax > 0.0 { 0.9 * cell / vmax } else { 0.0 };
        let _ = writeln!(
            s,
            r#"<line class="arrow" x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{:.1}"/>"#,
            x + v.x * k,
            y - v.y * k
        );
    }
    s.push_str("</g>\n");
}

fn draw_markers(s: &mut String, scenario: &Scenario, log: &MissionLog, f: &Frame) {
    let collected: BTreeSet<usize> = log.vehicles.iter().flat_map(|v| v.collected.iter().copied()).collect();
    let of_kind = |kind: EventKind| -> BTreeSet<usize> { log.events.iter().filter(|e| e.kind == kind).filter_map(|e| e.node).collect() };
    let discarded: BTreeSet<usize> = of_kind(EventKind::Discard).difference(&collected).copied().collect();
    let picked = of_kind(EventKind::Award);
    s.push_str("<g class=\"markers\">\n");
    for &j in &discarded {
        let (x, y) = f.px(scenario.position(j));
        let d = 6.0;
        let _ = writeln!(
            s,
            r##"<path class="discard" data-id="{j}" d="M{:.1},{:.1} L{:.1},{:.1} M{:.1},{:.1} L{:.1},{:.1}" stroke="#d62728" stroke-width="2.5"/>"##,
            x - d,
            y - d,
            x + d,
            y + d,
            x - d,
            y + d,
            x + d,
            y - d
        );
    }
    for &j in &picked {
        let (x, y) = f.px(scenario.position(j));
        let _ = writeln!(
            s,
            r##"<circle class="pickup" data-id="{j}" cx="{x:.1}" cy="{y:.1}" r="9" fill="none" stroke="#2ca02c" stroke-width="2.5"/>"##
        );
    }
    s.push_str("</g>\n");
}
