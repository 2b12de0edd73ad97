//! Parameter sweeps: a base configuration plus lists of values for dotted
//! field paths, expanded to their Cartesian product.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};
use winding_core::solver::RunConfig;

use crate::commands::simulate_into;
use crate::error::CliError;
use crate::rundir;

pub const THREADS_ENV: &str = "WINDING_WAVEMAP_THREADS";
pub const SUMMARY: &str = "sweep_summary.json";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: Value,
    /// Dotted path (`init.c`, `grid.J`) to the values it takes.
    #[serde(default)]
    pub vary: BTreeMap<String, Vec<Value>>,
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub params: BTreeMap<String, Value>,
    pub config: RunConfig,
}

fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), CliError> {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("bad parameter path {path:?}")));
    }
    for (k, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{path:?}: {part:?} is not inside an object")))?;
        if k + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| json!({}));
    }
    unreachable!("path has at least one component")
}

/// Every combination of the varied values, last path varying fastest.
pub fn expand(spec: &SweepSpec) -> Result<Vec<SweepPoint>, CliError> {
    let mut combos: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new()];
    for (path, values) in &spec.vary {
        if values.is_empty() {
            return Err(CliError::Config(format!("no values given for {path:?}")));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.insert(path.clone(), v.clone());
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .enumerate()
        .map(|(k, params)| {
            let mut v = spec.base.clone();
            for (path, value) in &params {
                set_path(&mut v, path, value.clone())?;
            }
            let config: RunConfig =
                serde_json::from_value(v).map_err(|e| CliError::Config(format!("sweep point {k}: {e}")))?;
            config.validate().map_err(|e| CliError::Config(format!("sweep point {k}: {e}")))?;
            Ok(SweepPoint { params, config })
        })
        .collect()
}

pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

pub fn run_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("run_{index:03}"))
}

pub fn sweep(grid: &Path, out: &Path) -> Result<Value, CliError> {
    let spec: SweepSpec = rundir::read_json(grid)?;
    let points = expand(&spec)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    log::info!("sweep of {} runs on {} threads", points.len(), pool.current_num_threads());

    let entries: Vec<Value> = pool.install(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(k, p)| {
                let dir = run_dir(out, k);
                match simulate_into(&dir, &p.config, "sweep") {
                    Ok((manifest, report)) => json!({
                        "index": k,
                        "params": p.params,
                        "run_dir": dir,
                        "config_hash": manifest.config_hash,
                        "outcome": manifest.outcome,
                        "energy_condition": manifest.energy_condition,
                        "wrap_count": report.wrap_count,
                        "monotone_from_t": report.monotone_from_t,
                        "monotone_rise": report.monotone_rise,
                        "z_cover_fraction": report.z_cover_fraction,
                        "lambda_trend": report.lambda_trend,
                    }),
                    Err(e) => json!({"index": k, "params": p.params, "run_dir": dir, "error": e.to_string()}),
                }
            })
            .collect()
    });
    let failed = entries.iter().filter(|e| e.get("error").is_some()).count();
    let summary = json!({"runs": entries, "failed": failed});
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    rundir::write_json(&out.join(SUMMARY), &summary)?;
    Ok(json!({"summary": out.join(SUMMARY), "runs": points.len(), "failed": failed}))
}
