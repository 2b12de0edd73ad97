use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_winding-wavemap"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

const SMALL: &str = r#"{
  "grid": {"R": 12.0, "J": 240},
  "t_end": 3.0,
  "output_dt": 0.25,
  "snapshot_every": 1,
  "init": {"c": 1.2, "y1_amp": 0.05, "alpha1_amp": 0.02}
}"#;

#[test]
fn geometry_check_passes_with_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["geometry-check"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = stdout_json(&out);
    let checks = report.as_array().unwrap();
    assert!(checks.iter().any(|c| c["check_name"] == "pushforward_identity"));
    for c in checks {
        assert!(c.get("max_residual").is_some() && c.get("pass").is_some());
    }
}

#[test]
fn geometry_check_rejects_bad_manifold() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"M": 1.5}"#).unwrap();
    let out = run(&["geometry-check", "--config", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hm_check_reports_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["hm-check"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["ground_state_energy"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-6);
    assert!(v["defect_samples"].as_array().unwrap().len() > 4);
    assert!(v.get("eps0").is_some() && v.get("profile_residual_max").is_some());
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(run(&[], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_rejects_horizon_past_data_support() {
    let dir = tempfile::tempdir().unwrap();
    // R - (bump_center + bump_width) = 12 - 5 = 7
    let cfg = SMALL.replace(r#""t_end": 3.0"#, r#""t_end": 8.0"#);
    fs::write(dir.path().join("far.json"), cfg).unwrap();
    let out = run(&["simulate", "far.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("runs/far").exists());
}

#[test]
fn simulate_rejects_malformed_json() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), "{ not json").unwrap();
    assert_eq!(run(&["simulate", "bad.json"], dir.path()).status.code(), Some(2));
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    let out = run(&["simulate", "small.json"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let rd = dir.path().join("runs/small");
    let series = fs::read_to_string(rd.join("series.csv")).unwrap();
    let mut lines = series.lines();
    assert_eq!(
        lines.next().unwrap(),
        "t,energy,lambda,Y_at_lambda,z_wrap,degree,cone_energy_A,annulus_energy,flux_A,kinetic_cone_avg"
    );
    assert_eq!(lines.count(), 13);
    let snap = fs::read_to_string(rd.join("snap_3.000000.csv")).unwrap();
    assert_eq!(snap.lines().next().unwrap(), "r,Y,Y_t,alpha,alpha_t");
    assert_eq!(snap.lines().count(), 241);

    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(rd.join("run_meta.json")).unwrap()).unwrap();
    for f in meta["outputs"].as_array().unwrap() {
        assert!(rd.join(f.as_str().unwrap()).exists(), "{f}");
    }
    assert_eq!(meta["config"]["grid"]["cells"], 240);
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 64);
    for col in ["t", "energy", "lambda", "Y_at_lambda", "flux_A", "kinetic_cone_avg"] {
        assert!(meta["columns"]["series.csv"].get(col).is_some(), "{col}");
    }

    fs::remove_file(rd.join("winding_report.json")).unwrap();
    let out = run(&["analyze", "runs/small"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v = stdout_json(&out);
    assert_eq!(v["snapshots_compared"], 13);
    assert_eq!(v["kinetic_average_rebuilt"], true);
    assert!(v["max_discrepancy"].as_f64().unwrap() <= 1e-9);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(rd.join("winding_report.json")).unwrap()).unwrap();
    for key in ["wrap_count", "monotone_from_t", "z_cover_fraction", "lambda_trend"] {
        assert!(report.get(key).is_some(), "{key}");
    }
}

#[test]
fn analyze_flags_tampered_series() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    assert_eq!(run(&["simulate", "small.json"], dir.path()).status.code(), Some(0));
    let path = dir.path().join("runs/small/series.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let mut fields: Vec<String> = lines[4].split(',').map(str::to_string).collect();
    let e: f64 = fields[1].parse().unwrap();
    fields[1] = format!("{}", e * (1.0 + 1e-6));
    lines[4] = fields.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let out = run(&["analyze", "runs/small"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let v = stdout_json(&out);
    assert_eq!(v["pass"], false);
    assert_eq!(v["mismatches"][0]["column"], "energy");
}

#[test]
fn identical_configs_give_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    for name in ["a", "b"] {
        assert_eq!(run(&["simulate", "small.json", "--name", name], dir.path()).status.code(), Some(0));
    }
    let a = dir.path().join("runs/a");
    let b = dir.path().join("runs/b");
    let mut csvs: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|n| n.to_string_lossy().ends_with(".csv"))
        .collect();
    csvs.sort();
    assert_eq!(csvs.len(), 14);
    for f in csvs {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap(), "{f:?}");
    }
}

#[test]
fn sweep_writes_every_run_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let grid = format!(r#"{{"base": {SMALL}, "vary": {{"init.c": [0.0, 1.2], "init.lam0": [0.5, 1.0]}}}}"#);
    fs::write(dir.path().join("grid.json"), grid).unwrap();
    let out = bin()
        .args(["sweep", "grid.json"])
        .env("WINDING_WAVEMAP_THREADS", "2")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let sd = dir.path().join("runs/grid");
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(sd.join("sweep_summary.json")).unwrap()).unwrap();
    let runs = summary["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 4);
    assert_eq!(summary["failed"], 0);
    for (k, r) in runs.iter().enumerate() {
        assert_eq!(r["index"], k);
        assert!(sd.join(format!("run_{k:03}/series.csv")).exists());
        assert!(r.get("z_cover_fraction").is_some());
    }
    assert_eq!(runs[3]["params"]["init.c"], 1.2);
    assert_eq!(runs[3]["params"]["init.lam0"], 1.0);
}

#[test]
fn sweep_rejects_bad_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("grid.json"), format!(r#"{{"base": {SMALL}}}"#)).unwrap();
    let out = bin()
        .args(["sweep", "grid.json"])
        .env("WINDING_WAVEMAP_THREADS", "zero")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn goat_tracks_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["goat-tracks", "--mode", "hamiltonian", "--t-end", "10", "--dt", "0.01", "--record-every", "10", "--out", "gt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("gt/trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,r,theta_lifted,energy");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.2).abs() < 1e-15);
    let v = stdout_json(&out);
    assert_eq!(v["summary"]["slow_near_circle_steps"], 0);

    let out = run(&["goat-tracks", "--t-end", "5", "--x0", "1.2,0", "--out", "grad"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("grad/trajectory.csv").exists());

    assert_eq!(run(&["goat-tracks", "--x0", "1.2"], dir.path()).status.code(), Some(2));
}
