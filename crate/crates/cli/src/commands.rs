use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;
use winding_core::bubble::hm_check;
use winding_core::diagnostics::{instantaneous_record, winding_series, DiagnosticsRecord, KineticAverage, WindingReport};
use winding_core::geometry::checks;
use winding_core::sandbox::{gradient_flow, hamiltonian_flow, Tolerances, TrajectoryPoint};
use winding_core::solver::{run, RunConfig};
use winding_core::{Manifold, ManifoldConfig, Solver};

use crate::error::CliError;
use crate::rundir::{self, RunManifest};

pub const CROSS_CHECK_TOL: f64 = 1e-9;

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let cfg: RunConfig = rundir::read_json(path)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_manifold(path: Option<&Path>) -> Result<Manifold, CliError> {
    let cfg = match path {
        Some(p) => rundir::read_json::<ManifoldConfig>(p)?,
        None => ManifoldConfig::default(),
    };
    Manifold::new(cfg).map_err(|e| CliError::Config(e.to_string()))
}

/// Run one configuration and write its directory.
pub fn simulate_into(dir: &Path, cfg: &RunConfig, subcommand: &str) -> Result<(RunManifest, WindingReport), CliError> {
    let started = rundir::now_unix();
    let out = run(cfg)?;
    let report = winding_series(&out.series);
    let manifest = rundir::write_run(dir, subcommand, cfg, &out, &report, started)?;
    Ok((manifest, report))
}

pub fn simulate(config: &Path, dir: &Path) -> Result<serde_json::Value, CliError> {
    let cfg = load_run_config(config)?;
    let (manifest, _) = simulate_into(dir, &cfg, "simulate")?;
    Ok(json!({
        "run_dir": dir,
        "outcome": manifest.outcome,
        "outputs": manifest.outputs,
        "config_hash": manifest.config_hash,
        "energy_condition": manifest.energy_condition,
    }))
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || (a - b).abs() <= CROSS_CHECK_TOL * a.abs().max(1.0)
}

fn columns_of(r: &DiagnosticsRecord) -> [(&'static str, f64); 9] {
    [
        ("energy", r.energy),
        ("lambda", r.lambda),
        ("Y_at_lambda", r.y_at_lambda),
        ("z_wrap", r.z_wrap),
        ("degree", r.degree as f64),
        ("cone_energy_A", r.cone_energy),
        ("annulus_energy", r.annulus_energy),
        ("flux_A", r.flux),
        ("kinetic_cone_avg", r.kinetic_cone_avg),
    ]
}

/// Recompute diagnostics from the snapshots of a run directory, compare them
/// with `series.csv` and write `winding_report.json`.
pub fn analyze(dir: &Path) -> Result<serde_json::Value, CliError> {
    let manifest: RunManifest = rundir::read_json(&dir.join(rundir::META))?;
    if rundir::config_hash(&manifest.config) != manifest.config_hash {
        return Err(CliError::Config(format!("{}: config hash does not match the echoed config", rundir::META)));
    }
    let series = rundir::read_series(&dir.join(rundir::SERIES))?;
    let cfg = &manifest.config;
    let solver = Solver::new(cfg.radial_grid()?, cfg.manifold()?, manifest.ghost, cfg.cfl)?;
    let snaps = rundir::list_snapshots(dir)?;
    // the running kinetic average can only be rebuilt when every record has a snapshot
    let full_history = snaps.len() == series.len();
    let mut kinetic = KineticAverage::new();

    let mut mismatches = Vec::new();
    let mut max_discrepancy: f64 = 0.0;
    let mut compared = 0;
    for (t_name, path) in &snaps {
        let Some(rec) = series.iter().find(|r| (r.t - t_name).abs() <= 5e-7) else {
            mismatches.push(json!({"snapshot": path, "reason": "no series row at this time"}));
            continue;
        };
        let state = rundir::read_snapshot(path, rec.t)?;
        if state.len() != solver.grid().cells() {
            return Err(CliError::Csv { path: path.clone(), line: 0, reason: "wrong number of cells".into() });
        }
        let mut again = instantaneous_record(&solver, &state, &cfg.diagnostics);
        if full_history {
            again.kinetic_cone_avg = kinetic.push(again.t, again.kinetic_in_cone);
        } else {
            again.kinetic_cone_avg = rec.kinetic_cone_avg;
        }
        for ((name, a), (_, b)) in columns_of(rec).into_iter().zip(columns_of(&again)) {
            if !(a.is_nan() && b.is_nan()) {
                max_discrepancy = max_discrepancy.max((a - b).abs());
            }
            if !close(a, b) {
                mismatches.push(json!({"t": rec.t, "column": name, "series": a, "recomputed": b}));
            }
        }
        compared += 1;
    }

    let report = winding_series(&series);
    rundir::write_json(&dir.join(rundir::REPORT), &report)?;
    let summary = json!({
        "run_dir": dir,
        "snapshots_compared": compared,
        "kinetic_average_rebuilt": full_history,
        "max_discrepancy": max_discrepancy,
        "tolerance": CROSS_CHECK_TOL,
        "mismatches": mismatches,
        "wrap_count": report.wrap_count,
        "monotone_from_t": report.monotone_from_t,
        "z_cover_fraction": report.z_cover_fraction,
        "lambda_trend": report.lambda_trend,
        "pass": mismatches.is_empty(),
    });
    if mismatches.is_empty() {
        Ok(summary)
    } else {
        Err(CliError::CheckFailed(summary))
    }
}

pub fn geometry_check(config: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let man = load_manifold(config)?;
    let results = checks::run_all(&man);
    let value = serde_json::to_value(&results).expect("check results serialize");
    if checks::all_hard_pass(&results) {
        Ok(value)
    } else {
        let failed: Vec<_> = results.iter().filter(|c| c.hard && !c.pass).collect();
        Err(CliError::CheckFailed(json!({"failed": failed, "results": value})))
    }
}

pub fn hm_check_cmd(config: Option<&Path>) -> Result<serde_json::Value, CliError> {
    let man = load_manifold(config)?;
    let report = hm_check(&man);
    let value = serde_json::to_value(&report).expect("report serializes");
    if report.pass {
        Ok(value)
    } else {
        Err(CliError::CheckFailed(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GoatMode {
    Gradient,
    Hamiltonian,
}

pub struct GoatArgs {
    pub mode: GoatMode,
    pub x0: [f64; 2],
    pub v0: [f64; 2],
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub out: PathBuf,
}

pub fn goat_tracks(a: &GoatArgs) -> Result<serde_json::Value, CliError> {
    let bad = |e: winding_core::sandbox::SandboxError| CliError::Config(e.to_string());
    let (points, summary): (Vec<TrajectoryPoint>, serde_json::Value) = match a.mode {
        GoatMode::Gradient => {
            let (p, s) = gradient_flow(a.x0, a.t_end, Tolerances::default()).map_err(bad)?;
            (p, serde_json::to_value(s).expect("summary serializes"))
        }
        GoatMode::Hamiltonian => {
            let (p, s) = hamiltonian_flow(a.x0, a.v0, a.t_end, a.dt, a.record_every).map_err(bad)?;
            (p, serde_json::to_value(s).expect("summary serializes"))
        }
    };
    fs::create_dir_all(&a.out).map_err(CliError::io(&a.out))?;
    let path = a.out.join("trajectory.csv");
    let mut text = String::with_capacity(48 * (points.len() + 1));
    text.push_str(TrajectoryPoint::CSV_HEADER);
    text.push('\n');
    for p in &points {
        text.push_str(&p.csv_row());
        text.push('\n');
    }
    fs::write(&path, text).map_err(CliError::io(&path))?;
    Ok(json!({"trajectory": path, "points": points.len(), "summary": summary}))
}
