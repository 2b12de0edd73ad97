//! Run directory layout: `run_meta.json`, `series.csv`, `snap_<t>.csv` and
//! `winding_report.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use winding_core::diagnostics::{DiagnosticsRecord, WindingReport};
use winding_core::solver::{EnergyCondition, FieldState, OuterGhost, RunConfig, RunOutcome, RunOutput};

use crate::error::CliError;

pub const META: &str = "run_meta.json";
pub const SERIES: &str = "series.csv";
pub const REPORT: &str = "winding_report.json";
pub const SNAPSHOT_HEADER: &str = "r,Y,Y_t,alpha,alpha_t";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: String,
    pub subcommand: String,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<String>,
    pub checks: BTreeMap<String, bool>,
    pub columns: BTreeMap<String, BTreeMap<String, String>>,
    pub config: RunConfig,
    pub ghost: OuterGhost,
    pub outcome: RunOutcome,
    pub energy_condition: EnergyCondition,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn config_hash(cfg: &RunConfig) -> String {
    let bytes = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn snapshot_name(t: f64) -> String {
    format!("snap_{t:.6}.csv")
}

fn columns() -> BTreeMap<String, BTreeMap<String, String>> {
    let doc = |pairs: &[(&str, &str)]| -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    };
    let mut m = BTreeMap::new();
    m.insert(
        SERIES.to_string(),
        doc(&[
            ("t", "time"),
            ("energy", "discrete conserved energy"),
            ("lambda", "concentration scale; NaN when the spherical energy is below the threshold"),
            ("Y_at_lambda", "torus coordinate at r = lambda on the universal cover"),
            ("z_wrap", "Y_at_lambda mod 1"),
            ("degree", "round(alpha(R) / pi)"),
            ("cone_energy_A", "energy in r < t - A"),
            ("annulus_energy", "energy in annulus_lambda_frac * t < r < t - A"),
            ("flux_A", "energy flux density through r = t - A"),
            ("kinetic_cone_avg", "time average of the kinetic energy inside the cone"),
        ]),
    );
    m.insert(
        "snap_<t>.csv".to_string(),
        doc(&[
            ("r", "cell centre"),
            ("Y", "torus coordinate along the geodesic"),
            ("Y_t", "time derivative of Y"),
            ("alpha", "polar angle on the sphere"),
            ("alpha_t", "time derivative of alpha"),
        ]),
    );
    m
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    Ok(BufWriter::new(fs::File::create(path).map_err(CliError::io(path))?))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| CliError::Json { path: path.into(), source })?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::io(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<(), CliError> {
    let mut w = create(path)?;
    let io = CliError::io(path);
    let res = (|| {
        writeln!(w, "{header}")?;
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()
    })();
    res.map_err(io)
}

pub fn write_series(path: &Path, series: &[DiagnosticsRecord]) -> Result<(), CliError> {
    write_lines(path, DiagnosticsRecord::CSV_HEADER, series.iter().map(|r| r.csv_row()))
}

pub fn write_snapshot(path: &Path, cfg: &RunConfig, s: &FieldState) -> Result<(), CliError> {
    let grid = cfg.radial_grid()?;
    write_lines(
        path,
        SNAPSHOT_HEADER,
        (0..s.len()).map(|j| format!("{},{},{},{},{}", grid.r(j), s.y[j], s.y_t[j], s.alpha[j], s.alpha_t[j])),
    )
}

/// Write everything a run produces into `dir`, returning the manifest.
pub fn write_run(
    dir: &Path,
    subcommand: &str,
    cfg: &RunConfig,
    out: &RunOutput,
    report: &WindingReport,
    started_unix: f64,
) -> Result<RunManifest, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    let mut outputs = vec![SERIES.to_string()];
    write_series(&dir.join(SERIES), &out.series)?;
    for snap in &out.snapshots {
        let name = snapshot_name(out.series[snap.index].t);
        write_snapshot(&dir.join(&name), cfg, &snap.state)?;
        outputs.push(name);
    }
    write_json(&dir.join(REPORT), report)?;
    outputs.push(REPORT.to_string());
    outputs.push(META.to_string());
    let mut checks = BTreeMap::new();
    checks.insert("energy_condition".to_string(), out.energy_condition.holds);
    let manifest = RunManifest {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand.to_string(),
        config_hash: config_hash(cfg),
        started_unix,
        finished_unix: now_unix(),
        outputs,
        checks,
        columns: columns(),
        config: cfg.clone(),
        ghost: out.ghost,
        outcome: out.outcome,
        energy_condition: out.energy_condition,
    };
    write_json(&dir.join(META), &manifest)?;
    Ok(manifest)
}

fn parse_row(path: &Path, line: usize, text: &str, width: usize) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|v| v.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| CliError::Csv { path: path.into(), line, reason: e.to_string() })?;
    if vals.len() != width {
        return Err(CliError::Csv {
            path: path.into(),
            line,
            reason: format!("expected {width} fields, found {}", vals.len()),
        });
    }
    Ok(vals)
}

fn read_table(path: &Path, header: &str) -> Result<Vec<Vec<f64>>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let mut lines = text.lines();
    let got = lines.next().unwrap_or("");
    if got != header {
        return Err(CliError::Csv { path: path.into(), line: 1, reason: format!("unexpected header {got:?}") });
    }
    let width = header.split(',').count();
    lines.enumerate().filter(|(_, l)| !l.is_empty()).map(|(k, l)| parse_row(path, k + 2, l, width)).collect()
}

/// Series rows as written; the fields not stored in the CSV are NaN.
pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>, CliError> {
    Ok(read_table(path, DiagnosticsRecord::CSV_HEADER)?
        .into_iter()
        .map(|v| DiagnosticsRecord {
            t: v[0],
            energy: v[1],
            lambda: v[2],
            y_at_lambda: v[3],
            z_wrap: v[4],
            degree: v[5] as i64,
            cone_energy: v[6],
            annulus_energy: v[7],
            flux: v[8],
            kinetic_cone_avg: v[9],
            alpha_exterior_osc: f64::NAN,
            kinetic_in_cone: f64::NAN,
        })
        .collect())
}

pub fn read_snapshot(path: &Path, t: f64) -> Result<FieldState, CliError> {
    let rows = read_table(path, SNAPSHOT_HEADER)?;
    let mut s = FieldState::zeros(rows.len());
    s.t = t;
    for (j, v) in rows.iter().enumerate() {
        s.y[j] = v[1];
        s.y_t[j] = v[2];
        s.alpha[j] = v[3];
        s.alpha_t[j] = v[4];
    }
    Ok(s)
}

/// Snapshot files in `dir` with the time parsed from the name, sorted by time.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(f64, PathBuf)>, CliError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(CliError::io(dir))? {
        let path = entry.map_err(CliError::io(dir))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if let Some(t) = name.strip_prefix("snap_").and_then(|n| n.strip_suffix(".csv")) {
            if let Ok(t) = t.parse::<f64>() {
                out.push((t, path));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}
