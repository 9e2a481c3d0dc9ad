use std::path::Path;
use std::process::{Command, Output};

use loe_core::sim::{fly_scenario, FaultEvent, Scenario, ScenarioConfig, SensorNoiseModel, VehicleParams};
use loe_core::DetectorConfig;

fn loe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_loe")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Writes `n` short ejection logs into `dir`.
fn write_fault_logs(dir: &Path, n: u64) {
    for i in 0..n {
        let t = 2.0 + 0.05 * i as f64;
        let cfg = ScenarioConfig::new(Scenario::Hover, t + 0.3)
            .with_seed(i)
            .with_fault(FaultEvent::ejection(i as usize % 4 + 1, t).unwrap());
        let noise = SensorNoiseModel {
            rng_seed: i,
            ..Default::default()
        };
        let log = fly_scenario(&cfg, &VehicleParams::default(), &noise).unwrap();
        log.write(dir.join(format!("f{i:02}.csv"))).unwrap();
    }
}

#[test]
fn simulate_is_deterministic_and_annotated() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = loe(&["simulate", "--scenario", "hover", "--duration", "10", "--fault", "3:1.56", "--seed", "7", "--out", path_str(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(stdout(&o).contains("fault_actuator=3"));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.lines().any(|l| l == "# fault_actuator=3"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5001);
}

#[test]
fn simulate_rejects_bad_fault() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = loe(&["simulate", "--fault", "5:1.0", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = loe(&["simulate", "--fault", "2:20", "--duration", "5", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn detect_reports_delay_and_clean_flights() {
    let dir = tempfile::tempdir().unwrap();
    let fault = dir.path().join("fault.csv");
    let o = loe(&["simulate", "--duration", "2.9", "--fault", "2:2.6", "--seed", "4", "--out", path_str(&fault)]);
    assert!(o.status.success());
    let ticks = dir.path().join("ticks.csv");
    let o = loe(&["detect", "--log", path_str(&fault), "--out", path_str(&ticks)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line = stdout(&o);
    let delay: f64 = line
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("delay_s="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.02..=0.15).contains(&delay), "{line}");
    assert!(line.contains("false_alarms=0") && line.contains("detected_actuator=2"), "{line}");
    assert_eq!(std::fs::read_to_string(&ticks).unwrap().lines().count(), 1 + 2900 / 20);

    let clean = dir.path().join("clean.csv");
    loe(&["simulate", "--scenario", "wind", "--duration", "8", "--seed", "5", "--out", path_str(&clean)]);
    let o = loe(&["detect", "--log", path_str(&clean)]);
    assert!(stdout(&o).contains("false_alarms=0"), "{}", stdout(&o));
}

#[test]
fn detect_missing_config_exits_2_naming_path() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("l.csv");
    loe(&["simulate", "--duration", "1", "--out", path_str(&log)]);
    let missing = dir.path().join("absent.toml");
    let o = loe(&["detect", "--log", path_str(&log), "--config", path_str(&missing)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains(path_str(&missing)), "{}", stderr(&o));
}

#[test]
fn default_config_round_trips() {
    let o = loe(&["--print-default-config"]);
    assert!(o.status.success());
    let cfg = DetectorConfig::from_toml(&stdout(&o)).unwrap();
    assert_eq!(cfg, DetectorConfig::default());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(&path, stdout(&o).replace("k_threshold = 0.25", "k_threshold = 0.3")).unwrap();
    let log = dir.path().join("l.csv");
    loe(&["simulate", "--duration", "1", "--out", path_str(&log)]);
    assert!(loe(&["detect", "--log", path_str(&log), "--config", path_str(&path)]).status.success());

    std::fs::write(&path, "[gains]\ng_r = 1.0\n").unwrap();
    assert_eq!(loe(&["detect", "--log", path_str(&log), "--config", path_str(&path)]).status.code(), Some(2));
}

#[test]
fn default_sweep_counts_rows() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("logs");
    std::fs::create_dir(&logs).unwrap();
    write_fault_logs(&logs, 26);
    let out = dir.path().join("out");
    let pattern = format!("{}/*.csv", logs.display());
    let o = loe(&["sweep", "--logs", &pattern, "--out-dir", path_str(&out), "--jobs", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 19 * 26);
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 19);

    let again = dir.path().join("again");
    loe(&["sweep", "--logs", &pattern, "--out-dir", path_str(&again), "--jobs", "1"]);
    assert_eq!(std::fs::read_to_string(again.join("results.csv")).unwrap(), results);
}

#[test]
fn sweep_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let empty = format!("{}/*.csv", dir.path().display());
    let o = loe(&["sweep", "--logs", &empty, "--out-dir", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no log files"));

    write_fault_logs(dir.path(), 1);
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "[[vary]]\nparameter = \"gains.g_yaw\"\nvalues = [1.0]\n").unwrap();
    let o = loe(&["sweep", "--logs", &empty, "--spec", path_str(&spec), "--out-dir", path_str(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("gains.g_yaw"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn report_single_run() {
    let dir = tempfile::tempdir().unwrap();
    write_fault_logs(dir.path(), 1);
    let spec = dir.path().join("spec.toml");
    std::fs::write(&spec, "").unwrap();
    let out = dir.path().join("out");
    let pattern = format!("{}/*.csv", dir.path().display());
    let o = loe(&["sweep", "--logs", &pattern, "--spec", path_str(&spec), "--out-dir", path_str(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let summary = dir.path().join("summary.csv");
    let o = loe(&["report", "--results", path_str(&out.join("results.csv")), "--out", path_str(&summary)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert_eq!(table.lines().count(), 2, "{table}");
    assert!(table.lines().nth(1).unwrap().starts_with("base"));
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 2);

    let o = loe(&["report", "--results", path_str(&dir.path().join("nothing.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}
