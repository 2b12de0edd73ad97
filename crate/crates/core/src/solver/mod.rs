//! Method-of-lines solver for the radially reduced wave map `(Y, alpha)`.
//!
//! The semi-discretization is Hamiltonian: the energy below is a sum of node
//! terms and face terms on the cell-centered grid, and the forces are its
//! exact gradient. Time stepping is the generalized Störmer–Verlet method,
//! which for this Hamiltonian is fully explicit, symmetric and symplectic.

mod config;
mod run;

pub use config::{init_data, DiagnosticsConfig, GridConfig, InitConfig, RunConfig};
pub use run::{energy_condition, output_times, run, run_with_observer, EnergyCondition, RunOutcome, RunOutput, Snapshot};

use crate::geometry::{GeometryError, Manifold};
use crate::quadrature::CompensatedSum;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("time step {dt} exceeds the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("non-finite field values at t = {t}")]
    BlowupDetected { t: f64 },
}

/// Cell-centered radial grid on `(0, R)`: nodes `r_j = (j + 1/2) dr`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    r_max: f64,
    cells: usize,
}

impl RadialGrid {
    pub fn new(r_max: f64, cells: usize) -> Result<Self, SolverError> {
        if !(r_max.is_finite() && r_max > 0.0) {
            return Err(SolverError::Config(format!("R must be positive, got {r_max}")));
        }
        if cells < 4 {
            return Err(SolverError::Config(format!("need at least 4 cells, got {cells}")));
        }
        Ok(Self { r_max, cells })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dr(&self) -> f64 {
        self.r_max / self.cells as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr()
    }

    /// Radius of the face between cells `k` and `k + 1`.
    pub fn face(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.dr()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.cells).map(|j| self.r(j)).collect()
    }
}

/// The full dynamical state at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub y: Vec<f64>,
    pub y_t: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_t: Vec<f64>,
}

impl FieldState {
    pub fn zeros(cells: usize) -> Self {
        Self {
            t: 0.0,
            y: vec![0.0; cells],
            y_t: vec![0.0; cells],
            alpha: vec![0.0; cells],
            alpha_t: vec![0.0; cells],
        }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite()
            && [&self.y, &self.y_t, &self.alpha, &self.alpha_t]
                .iter()
                .all(|a| a.iter().all(|v| v.is_finite()))
    }

    pub fn max_abs_diff(&self, other: &FieldState) -> f64 {
        let pairs = [
            (&self.y, &other.y),
            (&self.y_t, &other.y_t),
            (&self.alpha, &other.alpha),
            (&self.alpha_t, &other.alpha_t),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

/// Values of `Y` and `alpha` in the ghost cell beyond `r = R`, held fixed for
/// the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OuterGhost {
    pub y: f64,
    pub alpha: f64,
}

impl OuterGhost {
    /// Quadratic extrapolation of the last three cells.
    pub fn extrapolate(state: &FieldState) -> Self {
        let n = state.len();
        let ex = |v: &[f64]| 3.0 * v[n - 1] - 3.0 * v[n - 2] + v[n - 3];
        Self { y: ex(&state.y), alpha: ex(&state.alpha) }
    }
}

#[derive(Debug, Clone)]
pub struct Solver {
    grid: RadialGrid,
    manifold: Manifold,
    ghost: OuterGhost,
    cfl: f64,
}

/// Scratch arrays reused between steps.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    f: Vec<f64>,
    df: Vec<f64>,
    force_y: Vec<f64>,
    force_alpha: Vec<f64>,
    p_alpha: Vec<f64>,
}

impl Workspace {
    fn ensure(&mut self, n: usize) {
        for v in [&mut self.f, &mut self.df, &mut self.force_y, &mut self.force_alpha, &mut self.p_alpha] {
            v.resize(n, 0.0);
        }
    }
}

impl Solver {
    pub fn new(grid: RadialGrid, manifold: Manifold, ghost: OuterGhost, cfl: f64) -> Result<Self, SolverError> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(SolverError::Config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        if !(ghost.y.is_finite() && ghost.alpha.is_finite()) {
            return Err(SolverError::Config("outer ghost values must be finite".into()));
        }
        Ok(Self { grid, manifold, ghost, cfl })
    }

    /// Solver whose outer ghost values are extrapolated from `initial`.
    pub fn for_initial_state(
        grid: RadialGrid,
        manifold: Manifold,
        cfl: f64,
        initial: &FieldState,
    ) -> Result<Self, SolverError> {
        if initial.len() != grid.cells() {
            return Err(SolverError::Config(format!(
                "state has {} cells, grid has {}",
                initial.len(),
                grid.cells()
            )));
        }
        Self::new(grid, manifold, OuterGhost::extrapolate(initial), cfl)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn manifold(&self) -> &Manifold {
        &self.manifold
    }

    pub fn ghost(&self) -> OuterGhost {
        self.ghost
    }

    pub fn cfl(&self) -> f64 {
        self.cfl
    }

    pub fn max_dt(&self) -> f64 {
        self.cfl * self.grid.dr()
    }

    fn fill_f(&self, y: &[f64], f: &mut [f64], df: &mut [f64]) {
        for ((yj, fj), dfj) in y.iter().zip(f.iter_mut()).zip(df.iter_mut()) {
            let (a, b) = self.manifold.on_geodesic(*yj);
            *fj = a;
            *dfj = b;
        }
    }

    /// Forces per unit cell weight: minus the gradient of the potential
    /// energy with respect to `alpha_j` and `Y_j`, divided by `r_j dr`.
    fn forces(&self, y: &[f64], alpha: &[f64], f: &[f64], df: &[f64], out_y: &mut [f64], out_alpha: &mut [f64]) {
        let n = self.grid.cells();
        let dr = self.grid.dr();
        let inv_dr2 = 1.0 / (dr * dr);
        let f_ghost = self.manifold.f_on_geodesic(self.ghost.y);
        let y_at = |k: usize| if k < n { y[k] } else { self.ghost.y };
        let a_at = |k: usize| if k < n { alpha[k] } else { self.ghost.alpha };
        let f_at = |k: usize| if k < n { f[k] } else { f_ghost };
        // face k joins cells k and k + 1; face n - 1 joins the last cell to the ghost
        let mut left_flux_y = 0.0;
        let mut left_flux_a = 0.0;
        let mut left_da2 = 0.0;
        for j in 0..n {
            let rf = self.grid.face(j);
            let dy = y_at(j + 1) - y[j];
            let da = a_at(j + 1) - alpha[j];
            let big_f = 0.5 * (f[j] + f_at(j + 1));
            let flux_y = rf * dy;
            let flux_a = rf * big_f * da;
            let da2 = rf * da * da;
            let rj = self.grid.r(j);
            let s = alpha[j].sin();
            out_alpha[j] = (flux_a - left_flux_a) * inv_dr2 / rj - f[j] * (2.0 * alpha[j]).sin() / (2.0 * rj * rj);
            out_y[j] = (flux_y - left_flux_y) * inv_dr2 / rj
                - df[j] * ((left_da2 + da2) * inv_dr2 / (4.0 * rj) + s * s / (2.0 * rj * rj));
            left_flux_y = flux_y;
            left_flux_a = flux_a;
            left_da2 = da2;
        }
    }

    /// Accelerations `(Y_tt, alpha_tt)` of the semi-discrete system.
    pub fn rhs(&self, state: &FieldState) -> (Vec<f64>, Vec<f64>) {
        let n = state.len();
        let mut ws = Workspace::default();
        ws.ensure(n);
        self.fill_f(&state.y, &mut ws.f, &mut ws.df);
        self.forces(&state.y, &state.alpha, &ws.f, &ws.df, &mut ws.force_y, &mut ws.force_alpha);
        let mut acc_y = vec![0.0; n];
        let mut acc_a = vec![0.0; n];
        for j in 0..n {
            let at = state.alpha_t[j];
            acc_y[j] = ws.force_y[j] + 0.5 * ws.df[j] * at * at;
            acc_a[j] = (ws.force_alpha[j] - ws.df[j] * state.y_t[j] * at) / ws.f[j];
        }
        (acc_y, acc_a)
    }

    pub fn check_dt(&self, dt: f64) -> Result<(), SolverError> {
        let limit = self.max_dt();
        if !dt.is_finite() || dt.abs() > limit * (1.0 + 1e-12) {
            return Err(SolverError::CflViolation { dt, limit });
        }
        Ok(())
    }

    /// One step of size `dt` (negative steps run backwards in time).
    pub fn step(&self, state: &FieldState, dt: f64) -> Result<FieldState, SolverError> {
        let mut next = state.clone();
        let mut ws = Workspace::default();
        self.step_in_place(&mut next, dt, &mut ws)?;
        Ok(next)
    }

    pub fn step_in_place(&self, s: &mut FieldState, dt: f64, ws: &mut Workspace) -> Result<(), SolverError> {
        self.check_dt(dt)?;
        let n = s.len();
        ws.ensure(n);
        let h2 = 0.5 * dt;

        self.fill_f(&s.y, &mut ws.f, &mut ws.df);
        self.forces(&s.y, &s.alpha, &ws.f, &ws.df, &mut ws.force_y, &mut ws.force_alpha);
        for j in 0..n {
            let pa = ws.f[j] * s.alpha_t[j] + h2 * ws.force_alpha[j];
            ws.p_alpha[j] = pa;
            let at = pa / ws.f[j];
            s.y_t[j] += h2 * (ws.force_y[j] + 0.5 * ws.df[j] * at * at);
            // remember 1/f at the old position in alpha_t until the drift is done
            s.alpha_t[j] = 1.0 / ws.f[j];
            s.y[j] += dt * s.y_t[j];
        }
        self.fill_f(&s.y, &mut ws.f, &mut ws.df);
        for j in 0..n {
            s.alpha[j] += h2 * ws.p_alpha[j] * (s.alpha_t[j] + 1.0 / ws.f[j]);
        }
        self.forces(&s.y, &s.alpha, &ws.f, &ws.df, &mut ws.force_y, &mut ws.force_alpha);
        for j in 0..n {
            let at_half = ws.p_alpha[j] / ws.f[j];
            s.y_t[j] += h2 * (ws.force_y[j] + 0.5 * ws.df[j] * at_half * at_half);
            s.alpha_t[j] = (ws.p_alpha[j] + h2 * ws.force_alpha[j]) / ws.f[j];
        }
        s.t += dt;
        if !s.is_finite() {
            return Err(SolverError::BlowupDetected { t: s.t });
        }
        Ok(())
    }

    /// Energy of each cell: its node terms plus half of each adjacent face
    /// term (the ghost face belongs to the last cell). Includes the `2 pi`
    /// angular factor, so the entries sum to [`Solver::energy`].
    pub fn cell_energies(&self, s: &FieldState) -> Vec<f64> {
        let n = s.len();
        let dr = self.grid.dr();
        let f_ghost = self.manifold.f_on_geodesic(self.ghost.y);
        let f: Vec<f64> = s.y.iter().map(|&y| self.manifold.f_on_geodesic(y)).collect();
        let mut out = vec![0.0; n];
        for j in 0..n {
            let r = self.grid.r(j);
            let sn = s.alpha[j].sin();
            out[j] += 2.0 * PI * r * dr
                * (0.5 * s.y_t[j] * s.y_t[j] + 0.5 * f[j] * s.alpha_t[j] * s.alpha_t[j] + f[j] * sn * sn / (2.0 * r * r));
            let (y1, a1, f1) = if j + 1 < n { (s.y[j + 1], s.alpha[j + 1], f[j + 1]) } else { (self.ghost.y, self.ghost.alpha, f_ghost) };
            let dy = (y1 - s.y[j]) / dr;
            let da = (a1 - s.alpha[j]) / dr;
            let face = 2.0 * PI * self.grid.face(j) * dr * 0.5 * (dy * dy + 0.5 * (f[j] + f1) * da * da);
            if j + 1 < n {
                out[j] += 0.5 * face;
                out[j + 1] += 0.5 * face;
            } else {
                out[j] += face;
            }
        }
        out
    }

    /// The conserved discrete energy.
    pub fn energy(&self, s: &FieldState) -> f64 {
        let mut acc = CompensatedSum::new();
        for e in self.cell_energies(s) {
            acc.add(e);
        }
        acc.value()
    }

    /// Energy inside the ball `r < rho`, counting the cell that straddles
    /// `rho` in proportion to the part of it that lies inside.
    pub fn energy_within(&self, s: &FieldState, rho: f64) -> f64 {
        self.energy_between(s, 0.0, rho)
    }

    /// Energy in the annulus `r_in < r < r_out`.
    pub fn energy_between(&self, s: &FieldState, r_in: f64, r_out: f64) -> f64 {
        if r_out <= r_in {
            return 0.0;
        }
        let cells = self.cell_energies(s);
        let dr = self.grid.dr();
        let mut acc = CompensatedSum::new();
        for (j, e) in cells.iter().enumerate() {
            let lo = j as f64 * dr;
            let hi = lo + dr;
            let overlap = (hi.min(r_out) - lo.max(r_in)).max(0.0);
            if overlap > 0.0 {
                acc.add(e * (overlap / dr).min(1.0));
            }
        }
        acc.value()
    }
}
