//! The degree-one harmonic map `alpha = 2 arctan r`, its energy, fitting it
//! to snapshots, and the first variation of the energy when the bubble is
//! moved along the geodesic.

use crate::geometry::Manifold;
use crate::quadrature::{integrate, integrate_half_line, lagrange4, CompensatedSum};
use crate::solver::{FieldState, Solver};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BubbleError {
    #[error("scale {lambda} is below four cells ({min})")]
    UnderResolved { lambda: f64, min: f64 },
    #[error("fit window reaches r = {r_out}, beyond R = {r_max}")]
    OutOfDomain { r_out: f64, r_max: f64 },
    #[error("invalid scale {0}")]
    BadScale(f64),
}

pub fn hm_profile(r: f64) -> f64 {
    2.0 * r.atan()
}

/// Residual of `alpha'' + alpha'/r - sin(2 alpha)/(2 r^2)` for the profile,
/// using its closed-form derivatives.
pub fn profile_residual(r: f64) -> f64 {
    let d = 1.0 + r * r;
    let a1 = 2.0 / d;
    let a2 = -4.0 * r / (d * d);
    a2 + a1 / r - (2.0 * hm_profile(r)).sin() / (2.0 * r * r)
}

/// Static spherical energy density `1/2 (alpha'^2 + sin^2 alpha / r^2)` of
/// `2 arctan(r / rho)`.
fn profile_density(r: f64, rho: f64) -> f64 {
    let x = r / rho;
    let d = 1.0 + x * x;
    let a1 = 2.0 / (rho * d);
    let s = hm_profile(x).sin();
    0.5 * (a1 * a1 + if r > 0.0 { s * s / (r * r) } else { a1 * a1 })
}

/// `2 pi int_0^inf e(alpha) r dr` for `alpha = 2 arctan(r / rho)`.
pub fn ground_state_energy_scaled(rho: f64) -> f64 {
    2.0 * PI * integrate_half_line(&|r| profile_density(r, rho) * r, 1e-13, 0.0)
}

pub fn ground_state_energy() -> f64 {
    ground_state_energy_scaled(1.0)
}

/// Energy of `2 arctan(r / a) + 2 arctan(r / b)`: two ground-state profiles
/// glued at very different scales, a degree-two map that is not harmonic.
pub fn degree_two_witness_energy(a: f64, b: f64) -> f64 {
    let dens = |r: f64| {
        let (xa, xb) = (r / a, r / b);
        let d1 = 2.0 / (a * (1.0 + xa * xa)) + 2.0 / (b * (1.0 + xb * xb));
        let s = (hm_profile(xa) + hm_profile(xb)).sin();
        0.5 * (d1 * d1 + s * s / (r * r))
    };
    // integrate in log r; the integrand r^2 e decays at both ends
    let g = |t: f64| {
        let r = t.exp();
        dens(r) * r * r
    };
    let lo = (a.min(b)).ln() - 40.0;
    let hi = (a.max(b)).ln() + 40.0;
    2.0 * PI * integrate(&g, lo, hi, 1e-12, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleFit {
    pub lambda_fit: f64,
    /// Root-mean-square misfit over the window.
    pub residual_l2: f64,
    pub z0: f64,
    pub energy_in_window: f64,
}

/// Window in units of the concentration scale.
pub const FIT_WINDOW: (f64, f64) = (0.125, 8.0);
const FIT_SAMPLES: usize = 200;

fn window_samples(lambda: f64) -> Vec<f64> {
    let (a, b) = FIT_WINDOW;
    let (la, lb) = (a.ln(), b.ln());
    (0..FIT_SAMPLES)
        .map(|i| lambda * (la + (lb - la) * i as f64 / (FIT_SAMPLES - 1) as f64).exp())
        .collect()
}

/// Fourth-order interpolation of a field at radius `r`; `parity` is `1` for
/// even and `-1` for odd reflection across the origin, `ghost` the value
/// one cell beyond `R`.
fn interpolate(values: &[f64], dr: f64, parity: f64, ghost: f64, r: f64) -> f64 {
    let n = values.len();
    let sample = |j: isize| {
        if j < 0 {
            parity * values[(-j - 1) as usize]
        } else if (j as usize) < n {
            values[j as usize]
        } else {
            ghost
        }
    };
    lagrange4(&sample, 0.5 * dr, dr, n + 1, r)
}

fn misfit(rs: &[f64], alpha: &[f64], theta: f64) -> f64 {
    let mu = theta.exp();
    let mut acc = CompensatedSum::new();
    for (r, a) in rs.iter().zip(alpha) {
        let d = a - 2.0 * (r / mu).atan();
        acc.add(d * d);
    }
    acc.value()
}

/// Least-squares fit of `2 arctan(r / lambda_fit)` to `alpha` on the window
/// `lambda * [1/8, 8]`.
pub fn extract_bubble(solver: &Solver, s: &FieldState, lambda: f64) -> Result<BubbleFit, BubbleError> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(BubbleError::BadScale(lambda));
    }
    let grid = solver.grid();
    let dr = grid.dr();
    if lambda < 4.0 * dr {
        return Err(BubbleError::UnderResolved { lambda, min: 4.0 * dr });
    }
    let r_out = FIT_WINDOW.1 * lambda;
    if r_out > grid.r_max() {
        return Err(BubbleError::OutOfDomain { r_out, r_max: grid.r_max() });
    }
    let ghost = solver.ghost();
    let rs = window_samples(lambda);
    let alpha: Vec<f64> = rs.iter().map(|&r| interpolate(&s.alpha, dr, -1.0, ghost.alpha, r)).collect();
    let ys: Vec<f64> = rs.iter().map(|&r| interpolate(&s.y, dr, 1.0, ghost.y, r)).collect();

    // coarse scan in log scale, then Gauss-Newton
    let (lo, hi) = ((lambda / 50.0).ln(), (lambda * 50.0).ln());
    let mut theta = lo;
    let mut best = f64::INFINITY;
    for i in 0..=400 {
        let th = lo + (hi - lo) * i as f64 / 400.0;
        let m = misfit(&rs, &alpha, th);
        if m < best {
            best = m;
            theta = th;
        }
    }
    for _ in 0..60 {
        let mu = theta.exp();
        let (mut jtj, mut jtr) = (0.0, 0.0);
        for (r, a) in rs.iter().zip(&alpha) {
            let x = r / mu;
            let res = a - 2.0 * x.atan();
            let jac = 2.0 * x / (1.0 + x * x);
            jtj += jac * jac;
            jtr += jac * res;
        }
        if jtj <= 0.0 {
            break;
        }
        // d res / d theta = +jac, so the Gauss-Newton step is -jtr / jtj
        let mut step = -jtr / jtj;
        let mut accepted = false;
        for _ in 0..30 {
            let m = misfit(&rs, &alpha, theta + step);
            if m <= best {
                best = m;
                theta += step;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted || step.abs() < 1e-15 {
            break;
        }
    }
    let mean_y = ys.iter().sum::<f64>() / ys.len() as f64;
    let z0 = mean_y.rem_euclid(1.0);
    Ok(BubbleFit {
        lambda_fit: theta.exp(),
        residual_l2: (best / rs.len() as f64).sqrt(),
        z0: if z0 >= 1.0 { 0.0 } else { z0 },
        energy_in_window: solver.energy_between(s, FIT_WINDOW.0 * lambda, r_out),
    })
}

/// `int d_y f(0, c) e(alpha(r / rho)) r dr` for the ground-state profile
/// and constant `Y = c`, the derivative of the energy when the bubble is
/// translated along the geodesic.
pub fn stationarity_defect(manifold: &Manifold, c: f64, rho: f64) -> f64 {
    let slope = manifold.df_dy_on_gamma(c);
    if slope == 0.0 {
        return 0.0;
    }
    slope * integrate_half_line(&|r| profile_density(r, rho) * r, 1e-13, 0.0)
}

/// The same derivative for a grid state with variable `Y`.
pub fn stationarity_defect_on_grid(solver: &Solver, s: &FieldState) -> f64 {
    let dens = crate::diagnostics::spherical_density(solver, s);
    let dr = solver.grid().dr();
    let mut acc = CompensatedSum::new();
    for (j, e) in dens.iter().enumerate() {
        acc.add(solver.manifold().df_dy_on_gamma(s.y[j]) * e * solver.grid().r(j) * dr);
    }
    acc.value()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyGap {
    /// Below the ground state: not the energy of a nontrivial bubble.
    BelowGroundState,
    GroundState,
    /// Strictly between the ground state and the gap; no harmonic map of the
    /// target has such an energy.
    ForbiddenBand,
    AboveGap,
}

/// Classify a bubble energy against the ground state `e_s` and the gap
/// `eps0 / 2`; `tol` is the relative tolerance for equality with `e_s`.
pub fn energy_gap_report(energy: f64, e_s: f64, eps0: f64, tol: f64) -> EnergyGap {
    let band = tol * e_s;
    if energy < e_s - band {
        EnergyGap::BelowGroundState
    } else if energy <= e_s + band {
        EnergyGap::GroundState
    } else if energy <= e_s + 0.5 * eps0 {
        EnergyGap::ForbiddenBand
    } else {
        EnergyGap::AboveGap
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectSample {
    pub c: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmCheckReport {
    pub ground_state_energy: f64,
    pub ground_state_closed_form: f64,
    pub eps0: f64,
    pub eps_bar: f64,
    pub half_cot_7pi_16: f64,
    pub defect_samples: Vec<DefectSample>,
    pub profile_residual_max: f64,
    pub degree_two_energy: f64,
    pub pass: bool,
}

/// Reference values and the sign pattern of the stationarity defect.
pub fn hm_check(manifold: &Manifold) -> HmCheckReport {
    let e_s = ground_state_energy();
    let cs = [-5.0, -2.0, -1.0, -0.5, -0.2, 0.0, 0.2, 0.5, 1.0, 2.0, 5.0];
    let defect_samples: Vec<DefectSample> =
        cs.iter().map(|&c| DefectSample { c, value: stationarity_defect(manifold, c, 1.0) }).collect();
    let profile_residual_max = (0..=600)
        .map(|i| 10f64.powf(-3.0 + 6.0 * i as f64 / 600.0))
        .map(|r| profile_residual(r).abs())
        .fold(0.0, f64::max);
    let degree_two_energy = degree_two_witness_energy(0.01, 100.0);
    let plateau = manifold.plateau_half_width();
    let signs_ok = defect_samples.iter().all(|d| {
        if d.c.abs() <= plateau {
            d.value == 0.0
        } else {
            d.value.signum() == -d.c.signum() && d.value != 0.0
        }
    });
    let pass = (e_s - 4.0 * PI).abs() <= 1e-6
        && profile_residual_max <= 1e-12
        && degree_two_energy >= 2.0 * e_s
        && signs_ok;
    HmCheckReport {
        ground_state_energy: e_s,
        ground_state_closed_form: 4.0 * PI,
        eps0: manifold.eps0(),
        eps_bar: manifold.config().eps_bar,
        half_cot_7pi_16: 0.5 * crate::geometry::cot_7pi_16(),
        defect_samples,
        profile_residual_max,
        degree_two_energy,
        pass,
    }
}
