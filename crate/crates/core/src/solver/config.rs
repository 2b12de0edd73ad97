use super::{FieldState, OuterGhost, RadialGrid, SolverError};
use crate::geometry::{Manifold, ManifoldConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(alias = "R")]
    pub r_max: f64,
    #[serde(alias = "J")]
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    /// Initial torus position: `Y` starts constant at `c`.
    pub c: f64,
    #[serde(default = "one")]
    pub lam0: f64,
    #[serde(default)]
    pub y1_amp: f64,
    #[serde(default)]
    pub alpha1_amp: f64,
    #[serde(default = "default_bump_center")]
    pub bump_center: f64,
    #[serde(default = "default_bump_width")]
    pub bump_width: f64,
}

fn one() -> f64 {
    1.0
}

fn default_bump_center() -> f64 {
    3.0
}

fn default_bump_width() -> f64 {
    2.0
}

impl InitConfig {
    /// Smooth compactly supported bump of height 1 centred at `bump_center`.
    pub fn bump(&self, r: f64) -> f64 {
        let x = (r - self.bump_center) / self.bump_width;
        if x.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - x * x)).exp()
        }
    }

    /// The initial data continued one cell past the outer edge.
    pub fn outer_ghost(&self, grid: &RadialGrid) -> OuterGhost {
        let r = grid.r_max() + 0.5 * grid.dr();
        OuterGhost { y: self.c, alpha: 2.0 * (r / self.lam0).atan() }
    }

    /// Radius outside which the initial data is the unperturbed profile.
    pub fn support_radius(&self) -> f64 {
        if self.y1_amp == 0.0 && self.alpha1_amp == 0.0 {
            0.0
        } else {
            self.bump_center + self.bump_width
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    /// Inward shift `A` of the light cone used by the cone, annulus, flux and
    /// kinetic averages.
    #[serde(default)]
    pub cone_offset: f64,
    /// The annulus is `annulus_lambda_frac * t < r < t - A`.
    #[serde(default = "default_annulus_frac")]
    pub annulus_lambda_frac: f64,
}

fn default_annulus_frac() -> f64 {
    0.5
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { cone_offset: 0.0, annulus_lambda_frac: default_annulus_frac() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    pub output_dt: f64,
    pub init: InitConfig,
    #[serde(default)]
    pub manifold: ManifoldConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    /// Write a snapshot every this many output records (the last record is
    /// always written).
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    /// Stop once the concentration scale drops below four cells.
    #[serde(default)]
    pub stop_when_under_resolved: bool,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_snapshot_every() -> usize {
    10
}

impl RunConfig {
    pub fn radial_grid(&self) -> Result<RadialGrid, SolverError> {
        RadialGrid::new(self.grid.r_max, self.grid.cells)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::Config(m));
        self.radial_grid()?;
        self.manifold.validate()?;
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if !(self.output_dt.is_finite() && self.output_dt > 0.0) {
            return bad(format!("output_dt must be positive, got {}", self.output_dt));
        }
        let i = &self.init;
        if !(i.lam0.is_finite() && i.lam0 > 0.0) {
            return bad(format!("lam0 must be positive, got {}", i.lam0));
        }
        if !(i.c.is_finite() && i.y1_amp.is_finite() && i.alpha1_amp.is_finite()) {
            return bad("initial data parameters must be finite".into());
        }
        if !(i.bump_width > 0.0 && i.bump_center - i.bump_width >= 0.0) {
            return bad("velocity bump must have positive width and lie in r >= 0".into());
        }
        let reach = self.grid.r_max - i.support_radius();
        if self.t_end > reach {
            return bad(format!(
                "t_end = {} exceeds R - support = {reach}: the outer boundary would reach the data",
                self.t_end
            ));
        }
        if self.snapshot_every == 0 {
            return bad("snapshot_every must be at least 1".into());
        }
        let d = &self.diagnostics;
        if !(d.cone_offset >= 0.0 && d.annulus_lambda_frac >= 0.0 && d.annulus_lambda_frac < 1.0) {
            return bad("cone_offset must be >= 0 and annulus_lambda_frac in [0, 1)".into());
        }
        Ok(())
    }

    pub fn manifold(&self) -> Result<Manifold, SolverError> {
        Ok(Manifold::new(self.manifold)?)
    }
}

/// Degree-one bubble of scale `lam0` sitting at the torus position `c`, plus
/// the configured velocity bumps.
pub fn init_data(cfg: &RunConfig) -> Result<FieldState, SolverError> {
    cfg.validate()?;
    let grid = cfg.radial_grid()?;
    let i = &cfg.init;
    let mut s = FieldState::zeros(grid.cells());
    for j in 0..grid.cells() {
        let r = grid.r(j);
        let b = i.bump(r);
        s.y[j] = i.c;
        s.y_t[j] = i.y1_amp * b;
        s.alpha[j] = 2.0 * (r / i.lam0).atan();
        s.alpha_t[j] = i.alpha1_amp * b;
    }
    Ok(s)
}
