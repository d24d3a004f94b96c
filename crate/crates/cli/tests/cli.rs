use std::path::Path;
use std::process::{Command, Output};

fn fleetroute(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fleetroute"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_scenario(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    let out = fleetroute(&["gen", "--nodes", "15", "--vortexes", "3", "--obstacles", "2", "--size", "4000", "--seed", "5", "--out", s(&path)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_writes_full_scale_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scen.json");
    let out = fleetroute(&["gen", "--nodes", "60", "--vortexes", "20", "--seed", "1", "--out", s(&path)]);
    assert_eq!(out.status.code(), Some(0));
    let scenario = fleetroute::scenario::load_scenario(&path).unwrap();
    assert_eq!(scenario.nodes.len(), 60);
    assert_eq!(scenario.vortexes.len(), 20);
    let text = std::fs::read_to_string(&path).unwrap();
    let value: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(value["meta"]["seed"], 1);
}

#[test]
fn unknown_flag_exits_2() {
    let out = fleetroute(&["gen", "--bogus", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn missing_scenario_exits_1_naming_path() {
    let out = fleetroute(&["simulate", "--scenario", "/nonexistent/where.json", "--out", "/tmp/never.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/where.json"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn malformed_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"region\": 3}").unwrap();
    let out = fleetroute(&["plan", "--scenario", s(&path), "--out", s(&dir.path().join("p.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.json"));
}

#[test]
fn montecarlo_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scen = small_scenario(dir.path());
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = fleetroute(&[
            "montecarlo", "--scenario", s(&scen), "--runs", "50", "--seed", "9", "--tmax", "8000", "--legs", "matrix", "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# fleetroute"));
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "run,seed,M,theta,J,discards,pickups,runtime_s");
    assert_eq!(rows.len(), 51);
}

#[test]
fn plan_simulate_render_chain() {
    let dir = tempfile::tempdir().unwrap();
    let scen = small_scenario(dir.path());
    let plan = dir.path().join("plan.json");
    let log = dir.path().join("log.jsonl");
    let svg = dir.path().join("out/mission.svg");
    let o = fleetroute(&["plan", "--scenario", s(&scen), "--tmax", "8000", "--seed", "2", "--out", s(&plan)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = fleetroute(&[
        "simulate", "--scenario", s(&scen), "--plan", s(&plan), "--tmax", "8000", "--seed", "2", "--coordination", "off", "--out", s(&log),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&log).unwrap();
    let parsed = fleetroute::mission_sim::MissionLog::from_jsonl(&text).unwrap();
    assert!(!parsed.options.coordination);
    assert!(parsed.path_aware);

    let o = fleetroute(&["render", "--scenario", s(&scen), "--plan", s(&plan), "--log", s(&log), "--out", s(&svg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<?xml"));
    assert!(text.contains("<!-- fleetroute"));
    assert!(text.trim_end().ends_with("</svg>"));

    let o = fleetroute(&["plan", "--scenario", s(&scen), "--tmax", "8000", "--allocation", "kmeans", "--out", s(&dir.path().join("k.json"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}
