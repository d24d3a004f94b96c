use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use fleetroute::giant_route::build_cost_matrix;
use fleetroute::mission_sim::{
    digest, run_monte_carlo, run_seed, simulate_run, MissionContext, MissionLog, MonteCarloConfig,
};
use fleetroute::pre_planner::FleetPlan;
use fleetroute::render::render_svg;
use fleetroute::route_optimizer::{kmeans_plan, preplan_fleet, preplan_fleet_detailed, NoiseModel, PlannerParams};
use fleetroute::scenario::{generate_scenario, load_scenario, Scenario, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "fleetroute", version, about = "Plan and simulate multi-vehicle data collection missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a random scenario.
    Gen(GenArgs),
    /// Pre-plan a fleet for a scenario.
    Plan(PlanArgs),
    /// Simulate one mission and write its event log.
    Simulate(SimArgs),
    /// Run a batch of missions and write per-run metrics.
    Montecarlo(McArgs),
    /// Draw a scenario, plan or mission log as SVG.
    Render(RenderArgs),
}

#[derive(Args, Debug, Serialize)]
struct GenArgs {
    #[arg(long, default_value_t = 60)]
    nodes: usize,
    #[arg(long, default_value_t = 20)]
    vortexes: usize,
    #[arg(long, default_value_t = 10)]
    obstacles: usize,
    /// Side of the square region, m.
    #[arg(long, default_value_t = 10_000.0)]
    size: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Per-vehicle time budget, s.
    #[arg(long, default_value_t = 18_000.0)]
    tmax: f64,
    /// Propulsion speed, m/s.
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Allocation {
    Gr,
    Kmeans,
}

#[derive(Args, Debug, Serialize)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Allocation::Gr)]
    allocation: Allocation,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Switch {
    On,
    Off,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Legs {
    /// Legs follow planned paths timed through the realized field.
    Path,
    /// Straight-line leg times.
    Matrix,
}

#[derive(Args, Debug, Clone, Serialize)]
struct MissionArgs {
    #[arg(long, value_enum, default_value_t = Switch::On)]
    coordination: Switch,
    #[arg(long, value_enum, default_value_t = Legs::Path)]
    legs: Legs,
    /// Travel-time std as a fraction of the nominal leg time.
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    /// Maneuvers per hour of transit.
    #[arg(long, default_value_t = 1.0)]
    maneuver_rate: f64,
    /// Seconds per maneuver.
    #[arg(long, default_value_t = 60.0)]
    maneuver_cost: f64,
    /// Plan file; planned from the scenario when absent.
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SimArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    mission: MissionArgs,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct McArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    mission: MissionArgs,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct RenderArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

/// What every output file records about how it was made.
#[derive(Serialize)]
struct Meta {
    tool: String,
    seed: u64,
    config: String,
}

impl Meta {
    fn new<T: Serialize>(seed: u64, args: &T) -> Self {
        Self {
            tool: format!("fleetroute {}", env!("CARGO_PKG_VERSION")),
            seed,
            config: digest(args),
        }
    }

    fn comment_line(&self) -> String {
        format!("# {} seed={} config={}\n", self.tool, self.seed, self.config)
    }
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("{}", dir.display()))?;
    }
    fs::write(path, text).with_context(|| format!("{}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, meta: &Meta, body: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(&WithMeta { meta, body })?;
    write(path, &(text + "\n"))
}

fn read_scenario(path: &Path) -> Result<Scenario> {
    load_scenario(path).with_context(|| format!("{}", path.display()))
}

fn read_plan(path: &Path) -> Result<FleetPlan> {
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{}", path.display()))
}

fn read_log(path: &Path) -> Result<MissionLog> {
    let text = fs::read_to_string(path).with_context(|| format!("{}", path.display()))?;
    MissionLog::from_jsonl(&text).with_context(|| format!("{}", path.display()))
}

fn planner(common: &Common) -> PlannerParams {
    PlannerParams {
        prop_speed: common.speed,
        ..PlannerParams::default()
    }
}

fn check_plan(plan: &FleetPlan, scenario: &Scenario, path: &Path) -> Result<()> {
    let n = scenario.node_count();
    if let Some(bad) = plan.routes.iter().flat_map(|r| r.nodes.iter()).find(|&&j| j == 0 || j > n) {
        anyhow::bail!("{}: node {bad} is not in the scenario", path.display());
    }
    Ok(())
}

fn mission_setup(common: &Common, mission: &MissionArgs) -> Result<(Scenario, FleetPlan, MissionContext, MonteCarloConfig)> {
    let scenario = read_scenario(&common.scenario)?;
    let plan = match &mission.plan {
        Some(path) => {
            let plan = read_plan(path)?;
            check_plan(&plan, &scenario, path)?;
            plan
        }
        None => preplan_fleet(&scenario, common.tmax, &planner(common), common.seed)?,
    };
    let mut config = MonteCarloConfig {
        planner: planner(common),
        path_aware: mission.legs == Legs::Path,
        ..MonteCarloConfig::default()
    };
    config.mission.coordination = mission.coordination == Switch::On;
    config.mission.tmax = common.tmax;
    config.mission.prop_speed = common.speed;
    config.mission.noise = NoiseModel {
        sigma_frac: mission.sigma,
        maneuver_rate: mission.maneuver_rate,
        maneuver_cost: mission.maneuver_cost,
        ..NoiseModel::default()
    };
    anyhow::ensure!(config.mission.noise.is_valid(), "noise parameters must be non-negative");
    let ctx = if config.path_aware {
        MissionContext::path_aware(&scenario, common.speed, &config.path_planner, common.seed)?
    } else {
        MissionContext::matrix_mode(&scenario, common.speed)
    };
    Ok((scenario, plan, ctx, config))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let config = ScenarioConfig {
                region_size: a.size,
                node_count: a.nodes,
                vortex_count: a.vortexes,
                obstacle_count: a.obstacles,
                seed: a.seed,
                ..ScenarioConfig::default()
            };
            let scenario = generate_scenario(&config)?;
            write_json(&a.out, &Meta::new(a.seed, &a), &scenario)?;
            println!("wrote {}", a.out.display());
        }
        Command::Plan(a) => {
            let scenario = read_scenario(&a.common.scenario)?;
            let params = planner(&a.common);
            let (plan, matrix) = match a.allocation {
                Allocation::Gr => {
                    let p = preplan_fleet_detailed(&scenario, a.common.tmax, &params, a.common.seed)?;
                    (p.plan, p.matrix)
                }
                Allocation::Kmeans => {
                    let p = preplan_fleet_detailed(&scenario, a.common.tmax, &params, a.common.seed)?;
                    let m = build_cost_matrix(&scenario, a.common.speed);
                    (kmeans_plan(&scenario, &m, p.plan.m, a.common.tmax, &params, a.common.seed), m)
                }
            };
            write_json(&a.out, &Meta::new(a.common.seed, &a), &plan)?;
            println!(
                "M={} expected theta={:.4} idle={} -> {}",
                plan.m,
                plan.expected_completion(&matrix),
                plan.idle_nodes.len(),
                a.out.display()
            );
        }
        Command::Simulate(a) => {
            let (scenario, plan, ctx, config) = mission_setup(&a.common, &a.mission)?;
            let log = simulate_run(&ctx, &plan, &config, &scenario.field(), run_seed(a.common.seed, 0));
            let meta = Meta::new(a.common.seed, &a);
            write(&a.out, &(meta.comment_line() + &log.to_jsonl()))?;
            println!(
                "theta={:.4} J={:.3} discards={} pickups={} strands={} -> {}",
                log.theta,
                log.j,
                log.discards(),
                log.pickups(),
                log.strands(),
                a.out.display()
            );
        }
        Command::Montecarlo(a) => {
            anyhow::ensure!(a.runs >= 1, "--runs must be at least 1");
            let (_, plan, ctx, config) = mission_setup(&a.common, &a.mission)?;
            let table = run_monte_carlo(&ctx, &plan, &config, a.runs, a.common.seed, false);
            write(&a.out, &table.to_csv())?;
            let t = table.theta();
            println!(
                "runs={} theta mean={:.4} std={:.4} min={:.4} max={:.4} -> {}",
                a.runs,
                t.mean,
                t.std,
                t.min,
                t.max,
                a.out.display()
            );
        }
        Command::Render(a) => {
            let scenario = read_scenario(&a.scenario)?;
            let plan = a.plan.as_deref().map(read_plan).transpose()?;
            let log = a.log.as_deref().map(read_log).transpose()?;
            let svg = render_svg(&scenario, plan.as_ref(), log.as_ref())?;
            let meta = Meta::new(log.as_ref().map_or(0, |l| l.seed), &a);
            let comment = format!("<!-- {} seed={} config={} -->\n", meta.tool, meta.seed, meta.config);
            let svg = match svg.split_once('\n') {
                Some((decl, rest)) => format!("{decl}\n{comment}{rest}"),
                None => svg,
            };
            write(&a.out, &svg)?;
            println!("wrote {}", a.out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fleetroute: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(1)
        }
    }
}
