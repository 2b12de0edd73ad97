use super::config::init_data;
use super::{FieldState, OuterGhost, RunConfig, Solver, SolverError, Workspace};
use crate::bubble::ground_state_energy;
use crate::diagnostics::{record, DiagnosticsRecord, KineticAverage};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunOutcome {
    Completed,
    /// The fields stopped being finite during the step ending at `t`.
    BlowupDetected { t: f64 },
    /// The concentration scale fell below four cells at `t`.
    UnderResolved { t: f64, lambda: f64 },
}

/// Whether the initial energy lies below the ground state plus half the gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyCondition {
    pub energy: f64,
    pub ground_state: f64,
    pub eps0: f64,
    pub threshold: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    /// Index of the series record taken at the same time.
    pub index: usize,
    pub state: FieldState,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ghost: OuterGhost,
    pub energy_condition: EnergyCondition,
    pub series: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub outcome: RunOutcome,
}

/// Output times `0, dt, 2 dt, ...` up to `t_end`, with `t_end` appended when
/// it is not a multiple of `dt`.
pub fn output_times(t_end: f64, output_dt: f64) -> Vec<f64> {
    let n = (t_end / output_dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| k as f64 * output_dt).collect();
    let last = *times.last().expect("at least t = 0");
    if t_end - last > 1e-9 * output_dt {
        times.push(t_end);
    } else if let Some(l) = times.last_mut() {
        *l = l.min(t_end);
    }
    times
}

pub fn energy_condition(solver: &Solver, s: &FieldState) -> EnergyCondition {
    let energy = solver.energy(s);
    let ground_state = ground_state_energy();
    let eps0 = solver.manifold().eps0();
    let threshold = ground_state + 0.5 * eps0;
    EnergyCondition { energy, ground_state, eps0, threshold, holds: energy < threshold }
}

pub fn run(cfg: &RunConfig) -> Result<RunOutput, SolverError> {
    run_with_observer(cfg, |_| {})
}

/// As [`run`], calling `observe` on every record as soon as it is computed.
pub fn run_with_observer(
    cfg: &RunConfig,
    mut observe: impl FnMut(&DiagnosticsRecord),
) -> Result<RunOutput, SolverError> {
    let mut state = init_data(cfg)?;
    let grid = cfg.radial_grid()?;
    let solver = Solver::new(grid, cfg.manifold()?, cfg.init.outer_ghost(&grid), cfg.cfl)?;
    let condition = energy_condition(&solver, &state);
    if !condition.holds {
        log::warn!(
            "initial energy {:.6} is not below ground state + eps0/2 = {:.6}",
            condition.energy,
            condition.threshold
        );
    }

    let times = output_times(cfg.t_end, cfg.output_dt);
    let mut series = Vec::with_capacity(times.len());
    let mut snapshots = Vec::new();
    let mut kinetic = KineticAverage::new();
    let mut ws = Workspace::default();
    let max_dt = solver.max_dt();
    let mut outcome = RunOutcome::Completed;

    for (k, &t_out) in times.iter().enumerate() {
        if k > 0 {
            let start = state.t;
            let len = t_out - start;
            let steps = (len / max_dt - 1e-9).ceil().max(1.0) as usize;
            let dt = len / steps as f64;
            let before = state.clone();
            let mut failed = None;
            for _ in 0..steps {
                if let Err(e) = solver.step_in_place(&mut state, dt, &mut ws) {
                    failed = Some(e);
                    break;
                }
            }
            match failed {
                Some(SolverError::BlowupDetected { t }) => {
                    log::warn!("non-finite values at t = {t}, stopping");
                    outcome = RunOutcome::BlowupDetected { t };
                    state = before;
                    break;
                }
                Some(e) => return Err(e),
                None => state.t = t_out,
            }
        }
        let rec = record(&solver, &state, &cfg.diagnostics, &mut kinetic);
        observe(&rec);
        let index = series.len();
        series.push(rec);
        let last = k + 1 == times.len();
        let under = cfg.stop_when_under_resolved && rec.lambda.is_finite() && rec.lambda < 4.0 * grid.dr();
        if index % cfg.snapshot_every == 0 || last || under {
            snapshots.push(Snapshot { index, state: state.clone() });
        }
        if under {
            log::info!("concentration scale {} below 4 cells at t = {}", rec.lambda, rec.t);
            outcome = RunOutcome::UnderResolved { t: rec.t, lambda: rec.lambda };
            break;
        }
    }
    if let RunOutcome::BlowupDetected { .. } = outcome {
        let index = series.len() - 1;
        if snapshots.last().map(|s| s.index) != Some(index) {
            snapshots.push(Snapshot { index, state });
        }
    }
    Ok(RunOutput { ghost: solver.ghost(), energy_condition: condition, series, snapshots, outcome })
}
