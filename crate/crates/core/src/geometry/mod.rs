//! The target surface: a flat-ish torus carrying the metric `h`, the chart
//! `(w, z) -> (x, y)` in which the infinite geodesic becomes the line `x = 0`,
//! the cutoff `chi` and the warping function `f` of the sphere factor.
//!
//! Torus coordinates live in `[0, 1)^2`. In the chart the torus identification
//! becomes `(x, y) ~ (x + 1, y - 1)`; every function here is invariant under it.

pub mod checks;

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("chart undefined at w = {w} (the circle w = 0)")]
    ChartDomain { w: f64 },
    #[error("invalid manifold configuration: {0}")]
    Config(String),
}

/// Point of the torus, coordinates reduced into `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    w: f64,
    z: f64,
}

impl TorusPoint {
    pub fn new(w: f64, z: f64) -> Self {
        Self { w: wrap_unit(w), z: wrap_unit(z) }
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn z(&self) -> f64 {
        self.z
    }
}

/// Point in the `(x, y)` chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub x: f64,
    pub y: f64,
}

impl ChartPoint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// `x + y = cot(pi w)`, constant along the identification.
    pub fn u(&self) -> f64 {
        self.x + self.y
    }
}

/// Symmetric 2x2 metric tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl Metric2 {
    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.a11 + self.a22);
        let half_diff = 0.5 * (self.a11 - self.a22);
        let rad = half_diff.hypot(self.a12);
        (mean - rad, mean + rad)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.a11 > 0.0 && self.det() > 0.0
    }

    pub fn inner(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.a11 * a[0] * b[0] + self.a12 * (a[0] * b[1] + a[1] * b[0]) + self.a22 * a[1] * b[1]
    }

    pub fn norm(&self, a: [f64; 2]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Raise an index: the vector `g^{-1} df` for a covector `df`.
    pub fn raise(&self, covector: [f64; 2]) -> [f64; 2] {
        let det = self.det();
        [
            (self.a22 * covector[0] - self.a12 * covector[1]) / det,
            (-self.a12 * covector[0] + self.a11 * covector[1]) / det,
        ]
    }

    /// Sine of the angle between `a` and `b` measured in this metric, computed
    /// from the area form so that nearly parallel vectors keep full precision.
    pub fn sin_angle(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let area = self.det().sqrt() * (a[0] * b[1] - a[1] * b[0]).abs();
        area / (self.norm(a) * self.norm(b))
    }

    pub fn max_abs_diff(&self, other: &Metric2) -> f64 {
        (self.a11 - other.a11)
            .abs()
            .max((self.a12 - other.a12).abs())
            .max((self.a22 - other.a22).abs())
    }

    /// `J^T g J` for a 2x2 matrix `J` given row-major.
    pub fn congruence(&self, j: [[f64; 2]; 2]) -> Metric2 {
        let g = [[self.a11, self.a12], [self.a12, self.a22]];
        let mut out = [[0.0; 2]; 2];
        for (a, row) in out.iter_mut().enumerate() {
            for (b, entry) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += j[k][a] * g[k][l] * j[l][b];
                    }
                }
                *entry = acc;
            }
        }
        Metric2::new(out[0][0], 0.5 * (out[0][1] + out[1][0]), out[1][1])
    }
}

pub fn wrap_unit(v: f64) -> f64 {
    let r = v.rem_euclid(1.0);
    // rem_euclid can round up to exactly 1.0 for tiny negative inputs
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Inverse cotangent with range `(0, pi)`.
pub fn arccot(v: f64) -> f64 {
    0.5 * PI - v.atan()
}

/// Torus metric `h(w, z)`.
pub fn metric_h(p: TorusPoint) -> Metric2 {
    let s2 = (PI * p.w).sin().powi(2);
    Metric2::new(PI * PI, PI * s2, 1.0 + s2 * s2)
}

pub fn phi(p: TorusPoint) -> Result<ChartPoint, GeometryError> {
    let w = p.w;
    if w.min(1.0 - w) <= 1e-14 {
        return Err(GeometryError::ChartDomain { w });
    }
    let u = (PI * w).cos() / (PI * w).sin();
    Ok(ChartPoint::new(u - p.z, p.z))
}

pub fn phi_inv(q: ChartPoint) -> TorusPoint {
    TorusPoint::new(arccot(q.u()) / PI, q.y)
}

/// Jacobian of `phi` at `p`, row-major `[[dx/dw, dx/dz], [dy/dw, dy/dz]]`.
pub fn dphi(p: TorusPoint) -> [[f64; 2]; 2] {
    let s = (PI * p.w).sin();
    [[-PI / (s * s), -1.0], [0.0, 1.0]]
}

pub fn dphi_inv(p: TorusPoint) -> [[f64; 2]; 2] {
    let a = dphi(p)[0][0];
    [[1.0 / a, 1.0 / a], [0.0, 1.0]]
}

/// Chart metric `diag(1 / (1 + u^2)^2, 1)` with `u = x + y`.
pub fn metric_xy(q: ChartPoint) -> Metric2 {
    let u = q.u();
    let d = 1.0 + u * u;
    Metric2::new(1.0 / (d * d), 0.0, 1.0)
}

/// Christoffel symbols of the chart metric, `gamma[k][i][j]`.
pub fn christoffel_xy(q: ChartPoint) -> [[[f64; 2]; 2]; 2] {
    let u = q.u();
    let d = 1.0 + u * u;
    // h_xx = d^-2, d/du h_xx = -4u d^-3; both partials equal d/du
    let dg = -4.0 * u / (d * d * d);
    let g = 1.0 / (d * d);
    let gx_over = 0.5 * dg / g;
    let mut c = [[[0.0; 2]; 2]; 2];
    c[0][0][0] = gx_over;
    c[0][0][1] = gx_over;
    c[0][1][0] = gx_over;
    c[1][0][0] = -0.5 * dg;
    c
}

pub fn gamma(s: f64) -> TorusPoint {
    TorusPoint::new(arccot(s) / PI, s)
}

pub fn gamma_xy(s: f64) -> ChartPoint {
    ChartPoint::new(0.0, s)
}

/// Velocity of `gamma` in torus coordinates.
pub fn gamma_dot(s: f64) -> [f64; 2] {
    [-1.0 / (PI * (1.0 + s * s)), 1.0]
}

/// Norm of the geodesic equation `c'' + Gamma(c)(c', c')` along
/// `c(s) = (a s^2, s)` in the chart; `a = 0` is the curve `gamma`.
pub fn geodesic_residual_of_parabola(a: f64, s: f64) -> f64 {
    let q = ChartPoint::new(a * s * s, s);
    let vel = [2.0 * a * s, 1.0];
    let acc = [2.0 * a, 0.0];
    let c = christoffel_xy(q);
    let mut res = [0.0; 2];
    for k in 0..2 {
        res[k] = acc[k];
        for i in 0..2 {
            for j in 0..2 {
                res[k] += c[k][i][j] * vel[i] * vel[j];
            }
        }
    }
    res[0].hypot(res[1])
}

pub fn geodesic_residual(s: f64) -> f64 {
    geodesic_residual_of_parabola(0.0, s)
}

/// `f~` in the chart and its two partial derivatives.
pub fn f_tilde_xy(q: ChartPoint) -> f64 {
    f_tilde_with_grad(q.x, q.y).0
}

fn f_tilde_with_grad(x: f64, y: f64) -> (f64, [f64; 2]) {
    let env = (-2.0 * PI * (x + y)).exp();
    let phase = 2.0 * PI * (x - 0.125);
    let bracket = phase.sin() + SQRT_2;
    let value = env * bracket + 1.0;
    let dx = env * 2.0 * PI * (phase.cos() - bracket);
    let dy = -2.0 * PI * env * bracket;
    (value, [dx, dy])
}

/// `f~(-x, -y)` and its gradient with respect to `(x, y)`.
fn f_tilde_mirror_with_grad(x: f64, y: f64) -> (f64, [f64; 2]) {
    let (v, g) = f_tilde_with_grad(-x, -y);
    (v, [-g[0], -g[1]])
}

/// `cot(7 pi / 16)`: the value of `|x + y|` bounding the plateau `chi = 0`.
pub fn cot_7pi_16() -> f64 {
    let a = 7.0 * PI / 16.0;
    a.cos() / a.sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChiParams {
    /// Half-width (in `x`) of the tube around the geodesic where `chi`
    /// depends on `y` only.
    #[serde(default = "default_delta0")]
    pub delta0: f64,
    /// Steepness of the smooth steps, 1 is the plain `e^{-1/t}` construction.
    #[serde(default = "default_sharpness")]
    pub sharpness: f64,
}

fn default_delta0() -> f64 {
    0.05
}

fn default_sharpness() -> f64 {
    1.0
}

impl Default for ChiParams {
    fn default() -> Self {
        Self { delta0: default_delta0(), sharpness: default_sharpness() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    #[serde(default = "default_m", alias = "M")]
    pub m: f64,
    #[serde(default = "default_eps_bar")]
    pub eps_bar: f64,
    #[serde(default)]
    pub chi: ChiParams,
}

fn default_m() -> f64 {
    4.0
}

fn default_eps_bar() -> f64 {
    0.5
}

impl Default for ManifoldConfig {
    fn default() -> Self {
        Self { m: default_m(), eps_bar: default_eps_bar(), chi: ChiParams::default() }
    }
}

impl ManifoldConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::Config(msg));
        if !(self.m.is_finite() && self.m > 2.0) {
            return bad(format!("M must exceed 2, got {}", self.m));
        }
        if !(self.eps_bar.is_finite() && self.eps_bar > 0.0) {
            return bad(format!("eps_bar must be positive, got {}", self.eps_bar));
        }
        let d = self.chi.delta0;
        if !(d > 0.0 && cot_7pi_16() + 2.0 * d < 1.0 - 2.0 * d) {
            return bad(format!("delta0 must lie in (0, {:.4}), got {d}", (1.0 - cot_7pi_16()) / 4.0));
        }
        if !(self.chi.sharpness.is_finite() && self.chi.sharpness > 0.0) {
            return bad(format!("chi sharpness must be positive, got {}", self.chi.sharpness));
        }
        let sup = sup_f_tilde_on_chi_support(2000);
        if self.m <= 2.0 * sup {
            return bad(format!("M = {} must exceed 2 sup f~ = {}", self.m, 2.0 * sup));
        }
        Ok(())
    }

    /// `eps0 = min(eps_bar, cot(7 pi / 16) / 2)`.
    pub fn eps0(&self) -> f64 {
        self.eps_bar.min(0.5 * cot_7pi_16())
    }
}

/// Sampled supremum of `f~` over the part of the torus where it enters `f`
/// with a nonzero weight, `0 < w <= 7/16` (the mirrored half is symmetric).
pub fn sup_f_tilde_on_chi_support(samples_per_axis: usize) -> f64 {
    let c7 = cot_7pi_16();
    let mut sup = f64::NEG_INFINITY;
    for i in 0..=samples_per_axis {
        // u = x + y ranges over [cot(7pi/16), inf); the envelope peaks at the lower end
        let u = c7 + 8.0 * (i as f64 / samples_per_axis as f64).powi(2);
        for k in 0..samples_per_axis {
            let x = k as f64 / samples_per_axis as f64;
            sup = sup.max(f_tilde_xy(ChartPoint::new(x, u - x)));
        }
    }
    sup
}

/// Smooth monotone step: 0 for `t <= 0`, 1 for `t >= 1`, flat to all orders
/// at both ends.
#[derive(Debug, Clone, Copy)]
struct SmoothStep {
    k: f64,
}

impl SmoothStep {
    fn value_and_slope(&self, t: f64) -> (f64, f64) {
        if t <= 0.0 {
            return (0.0, 0.0);
        }
        if t >= 1.0 {
            return (1.0, 0.0);
        }
        let arg = self.k * (1.0 / t - 1.0 / (1.0 - t));
        let s = 1.0 / (1.0 + arg.exp());
        let slope = s * (1.0 - s) * self.k * (1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t)));
        (s, if slope.is_finite() { slope } else { 0.0 })
    }
}

/// The four pieces of the warping function, selected by `u = x + y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `u <= -1`: `f~(-x, -y)`.
    PureNeg,
    /// `-1 < u < 0`: blend of `f~(-x, -y)` with the plateau value.
    BlendNeg,
    /// `0 <= u < 1`: blend of `f~(x, y)` with the plateau value.
    BlendPos,
    /// `u >= 1`: `f~(x, y)`.
    PurePos,
}

impl Branch {
    pub fn of(u: f64) -> Branch {
        if u >= 1.0 {
            Branch::PurePos
        } else if u >= 0.0 {
            Branch::BlendPos
        } else if u > -1.0 {
            Branch::BlendNeg
        } else {
            Branch::PureNeg
        }
    }
}

/// One concrete warped-product target: the parameters plus the derived
/// constants of the cutoff.
#[derive(Debug, Clone, Copy)]
pub struct Manifold {
    config: ManifoldConfig,
    step: SmoothStep,
    /// `eta(v) = 0` for `|v| <= plateau`.
    plateau: f64,
    /// `eta(v) = 1` for `|v| >= saturate`.
    saturate: f64,
}

impl Manifold {
    pub fn new(config: ManifoldConfig) -> Result<Self, GeometryError> {
        config.validate()?;
        Ok(Self::new_unchecked(config))
    }

    fn new_unchecked(config: ManifoldConfig) -> Self {
        let d = config.chi.delta0;
        Self {
            config,
            step: SmoothStep { k: config.chi.sharpness },
            plateau: cot_7pi_16() + 2.0 * d,
            saturate: 1.0 - 2.0 * d,
        }
    }

    pub fn config(&self) -> &ManifoldConfig {
        &self.config
    }

    pub fn m(&self) -> f64 {
        self.config.m
    }

    pub fn eps0(&self) -> f64 {
        self.config.eps0()
    }

    /// Half-width of the interval of `y` on the geodesic where `f = M`.
    pub fn plateau_half_width(&self) -> f64 {
        self.plateau
    }

    /// `|y|` beyond which `f = f~` on the geodesic.
    pub fn blend_outer_edge(&self) -> f64 {
        self.saturate
    }

    /// Even step in `v`, and its derivative.
    fn eta(&self, v: f64) -> (f64, f64) {
        let span = self.saturate - self.plateau;
        let (s, ds) = self.step.value_and_slope((v.abs() - self.plateau) / span);
        (s, ds * v.signum() / span)
    }

    /// Cutoff in the chart on the strip `|u| < 1`, with its gradient.
    fn chi_with_grad(&self, q: ChartPoint) -> (f64, [f64; 2]) {
        let u = q.u();
        if u.abs() >= 1.0 {
            return (1.0, [0.0, 0.0]);
        }
        // representative of the chart point closest to the geodesic x = 0
        let xh = q.x - q.x.round();
        let y_loc = u - xh;
        let (bl, dbl) = self.step.value_and_slope(xh.abs() / self.config.chi.delta0);
        let dbl_dx = dbl * xh.signum() / self.config.chi.delta0;
        let (eta_y, deta_y) = self.eta(y_loc);
        let (eta_u, deta_u) = self.eta(u);
        let value = (1.0 - bl) * eta_y + bl * eta_u;
        // d(xh)/dx = 1, d(y_loc)/dx = 0, d(y_loc)/dy = 1, du = dx + dy
        let dx = dbl_dx * (eta_u - eta_y) + bl * deta_u;
        let dy = (1.0 - bl) * deta_y + bl * deta_u;
        (value, [dx, dy])
    }

    pub fn chi_xy(&self, q: ChartPoint) -> f64 {
        self.chi_with_grad(q).0
    }

    pub fn chi(&self, p: TorusPoint) -> f64 {
        match phi(p) {
            Ok(q) => self.chi_xy(q),
            Err(_) => 1.0,
        }
    }

    /// Gradient of `chi` in the chart (coordinate partials).
    pub fn chi_grad_xy(&self, q: ChartPoint) -> [f64; 2] {
        self.chi_with_grad(q).1
    }

    /// Evaluate one piece of the warping function, extended past its own
    /// interval of `u`. Used for seam checks.
    pub fn eval_branch(&self, branch: Branch, q: ChartPoint) -> (f64, [f64; 2]) {
        let m = self.config.m;
        match branch {
            Branch::PurePos => f_tilde_with_grad(q.x, q.y),
            Branch::PureNeg => f_tilde_mirror_with_grad(q.x, q.y),
            Branch::BlendPos | Branch::BlendNeg => {
                let (ft, gt) = if branch == Branch::BlendPos {
                    f_tilde_with_grad(q.x, q.y)
                } else {
                    f_tilde_mirror_with_grad(q.x, q.y)
                };
                let (c, gc) = self.chi_with_grad(q);
                if c == 0.0 && gc == [0.0, 0.0] {
                    return (m, [0.0, 0.0]);
                }
                let value = c * ft + (1.0 - c) * m;
                let grad = [gc[0] * (ft - m) + c * gt[0], gc[1] * (ft - m) + c * gt[1]];
                (value, grad)
            }
        }
    }

    /// Warping function in the chart and its coordinate gradient.
    pub fn f_xy_with_grad(&self, q: ChartPoint) -> (f64, [f64; 2]) {
        self.eval_branch(Branch::of(q.u()), q)
    }

    pub fn f_xy(&self, q: ChartPoint) -> f64 {
        self.f_xy_with_grad(q).0
    }

    pub fn f(&self, p: TorusPoint) -> f64 {
        match phi(p) {
            Ok(q) => self.f_xy(q),
            Err(_) => 1.0,
        }
    }

    /// Coordinate gradient `(df/dw, df/dz)` on the torus, obtained from the
    /// chart gradient by the chain rule. `None` on the circle `w = 0`.
    pub fn f_grad_torus(&self, p: TorusPoint) -> Option<[f64; 2]> {
        let q = phi(p).ok()?;
        let g = self.f_xy_with_grad(q).1;
        let j = dphi(p);
        Some([j[0][0] * g[0] + j[1][0] * g[1], j[0][1] * g[0] + j[1][1] * g[1]])
    }

    /// `(f, df/dy)` at `(0, y)`: the restriction to the geodesic, which is
    /// all the reduced flow ever sees.
    pub fn on_geodesic(&self, y: f64) -> (f64, f64) {
        let m = self.config.m;
        let a = y.abs();
        if a <= self.plateau {
            return (m, 0.0);
        }
        // f~(0, y) = e^{-2 pi |y|} / sqrt(2) + 1 on both sides
        let env = (-2.0 * PI * a).exp() * FRAC_1_SQRT_2;
        let base = env + 1.0;
        let dbase = -2.0 * PI * env * y.signum();
        if a >= self.saturate {
            return (base, dbase);
        }
        let (e, de) = self.eta(y);
        (e * base + (1.0 - e) * m, de * (base - m) + e * dbase)
    }

    pub fn f_on_geodesic(&self, y: f64) -> f64 {
        self.on_geodesic(y).0
    }

    pub fn df_dy_on_gamma(&self, y: f64) -> f64 {
        self.on_geodesic(y).1
    }
}

impl Default for Manifold {
    fn default() -> Self {
        Self::new_unchecked(ManifoldConfig::default())
    }
}
