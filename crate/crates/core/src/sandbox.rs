//! Planar toy model: the gradient flow and the Newtonian flow of a smooth,
//! non-analytic potential that equals 1 on the unit disk and spirals outside.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SandboxError {
    #[error("integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Potential `1 + e^{-1/(r-1)} (sin(1/(r-1) + theta) + 2)` outside the unit
/// disk and `1` inside.
pub fn goat_f(x: [f64; 2]) -> f64 {
    let r = x[0].hypot(x[1]);
    if r <= 1.0 {
        return 1.0;
    }
    let q = 1.0 / (r - 1.0);
    let theta = x[1].atan2(x[0]);
    1.0 + (-q).exp() * ((q + theta).sin() + 2.0)
}

pub fn goat_grad(x: [f64; 2]) -> [f64; 2] {
    let r = x[0].hypot(x[1]);
    if r <= 1.0 + 1e-8 {
        // e^{-1/(r-1)} and all its derivatives are below e^{-1e8} here
        return [0.0, 0.0];
    }
    let q = 1.0 / (r - 1.0);
    let theta = x[1].atan2(x[0]);
    let e = (-q).exp();
    let (s, c) = (q + theta).sin_cos();
    let f_r = e * q * q * (s + 2.0 - c);
    let f_theta = e * c;
    let (ux, uy) = (x[0] / r, x[1] / r);
    // grad = f_r e_r + (f_theta / r) e_theta, e_theta = (-uy, ux)
    [f_r * ux - f_theta / r * uy, f_r * uy + f_theta / r * ux]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: [f64; 2],
    pub v: [f64; 2],
    pub r: f64,
    pub theta_lifted: f64,
    /// `f(x)` for the gradient flow, `|v|^2 + f(x)` for the Newtonian flow.
    pub energy: f64,
}

impl TrajectoryPoint {
    pub const CSV_HEADER: &'static str = "t,r,theta_lifted,energy";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.t, self.r, self.theta_lifted, self.energy)
    }
}

/// Continuous angle: accumulates the wrapped increments of `atan2`.
#[derive(Debug, Clone, Copy)]
struct AngleLift {
    raw: f64,
    lifted: f64,
}

impl AngleLift {
    fn new(x: [f64; 2]) -> Self {
        let raw = x[1].atan2(x[0]);
        Self { raw, lifted: raw }
    }

    fn update(&mut self, x: [f64; 2]) -> f64 {
        let raw = x[1].atan2(x[0]);
        let mut d = raw - self.raw;
        if d > PI {
            d -= 2.0 * PI;
        } else if d <= -PI {
            d += 2.0 * PI;
        }
        self.lifted += d;
        self.raw = raw;
        self.lifted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientSummary {
    pub theta_gain: f64,
    pub r_final: f64,
    pub f_final: f64,
    /// Largest increase of `f` between consecutive accepted steps.
    pub max_f_increase: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

// Dormand–Prince 5(4) tableau
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Tolerances of the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-12, rel: 1e-10 }
    }
}

/// `x' = -grad f(x)` by adaptive Dormand–Prince, recording every accepted
/// step.
pub fn gradient_flow(
    x0: [f64; 2],
    t_end: f64,
    tol: Tolerances,
) -> Result<(Vec<TrajectoryPoint>, GradientSummary), SandboxError> {
    if !(t_end.is_finite() && t_end >= 0.0) || !x0.iter().all(|v| v.is_finite()) {
        return Err(SandboxError::Invalid("x0 and t_end must be finite, t_end >= 0".into()));
    }
    let rhs = |x: [f64; 2]| {
        let g = goat_grad(x);
        [-g[0], -g[1]]
    };
    let mut x = x0;
    let mut t = 0.0;
    let mut lift = AngleLift::new(x);
    let point = |t: f64, x: [f64; 2], th: f64| TrajectoryPoint {
        t,
        x,
        v: rhs(x),
        r: x[0].hypot(x[1]),
        theta_lifted: th,
        energy: goat_f(x),
    };
    let mut traj = vec![point(t, x, lift.lifted)];
    let mut summary = GradientSummary {
        theta_gain: 0.0,
        r_final: traj[0].r,
        f_final: traj[0].energy,
        max_f_increase: 0.0,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    let mut h = 1e-3_f64.min(t_end.max(f64::MIN_POSITIVE));
    let mut k = [[0.0; 2]; 7];
    k[0] = rhs(x);
    while t < t_end {
        h = h.min(t_end - t);
        if h <= 1e-14 * t.max(1.0) {
            return Err(SandboxError::StepFailure { t, reason: format!("step size underflow ({h})") });
        }
        for s in 1..7 {
            let mut xs = x;
            for (j, kj) in k.iter().enumerate().take(s) {
                xs[0] += h * A[s][j] * kj[0];
                xs[1] += h * A[s][j] * kj[1];
            }
            k[s] = rhs(xs);
        }
        let mut x5 = x;
        let mut err: f64 = 0.0;
        for d in 0..2 {
            let mut e = 0.0;
            for s in 0..7 {
                x5[d] += h * B5[s] * k[s][d];
                e += h * (B5[s] - B4[s]) * k[s][d];
            }
            let scale = tol.abs + tol.rel * x[d].abs().max(x5[d].abs());
            err = err.max((e / scale).abs());
        }
        if !err.is_finite() || !x5.iter().all(|v| v.is_finite()) {
            return Err(SandboxError::StepFailure { t, reason: "non-finite state".into() });
        }
        if err <= 1.0 {
            t += h;
            x = x5;
            // first-same-as-last: the seventh stage is the derivative at x5
            k[0] = k[6];
            let th = lift.update(x);
            let p = point(t, x, th);
            summary.max_f_increase = summary.max_f_increase.max(p.energy - traj.last().expect("nonempty").energy);
            traj.push(p);
            summary.accepted_steps += 1;
        } else {
            summary.rejected_steps += 1;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    let last = traj.last().expect("nonempty");
    summary.theta_gain = last.theta_lifted - traj[0].theta_lifted;
    summary.r_final = last.r;
    summary.f_final = last.energy;
    Ok((traj, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSummary {
    /// `max |E(t) - E(0)| / E(0)` for `E = |v|^2 + f`.
    pub energy_drift: f64,
    /// The same for `E = |v|^2 / 2 + f`, the quantity Newton's law conserves.
    pub half_energy_drift: f64,
    /// Smallest `|v|` seen while `|r - 1| <= 0.01`, infinite if never there.
    pub min_speed_near_circle: f64,
    /// Number of steps with `|r - 1| <= 0.01` and `|v| <= 0.01`.
    pub slow_near_circle_steps: usize,
    /// `inf_t (|r - 1| + | |v|^2 - (E0 - 1) |)`.
    pub obstruction_inf: f64,
    pub steps: usize,
}

/// `x'' = -grad f(x)` by velocity Verlet with fixed `dt`, recording every
/// `record_every` steps and the final state.
pub fn hamiltonian_flow(
    x0: [f64; 2],
    v0: [f64; 2],
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<(Vec<TrajectoryPoint>, HamiltonianSummary), SandboxError> {
    if !(dt > 0.0 && t_end >= 0.0 && record_every > 0) {
        return Err(SandboxError::Invalid("need dt > 0, t_end >= 0, record_every > 0".into()));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps > 0 { t_end / steps as f64 } else { dt };
    let (mut x, mut v) = (x0, v0);
    let literal = |x: [f64; 2], v: [f64; 2]| v[0] * v[0] + v[1] * v[1] + goat_f(x);
    let half = |x: [f64; 2], v: [f64; 2]| 0.5 * (v[0] * v[0] + v[1] * v[1]) + goat_f(x);
    let e0 = literal(x, v);
    let h0 = half(x, v);
    let mut lift = AngleLift::new(x);
    let point = |t: f64, x: [f64; 2], v: [f64; 2], th: f64| TrajectoryPoint {
        t,
        x,
        v,
        r: x[0].hypot(x[1]),
        theta_lifted: th,
        energy: literal(x, v),
    };
    let mut traj = vec![point(0.0, x, v, lift.lifted)];
    let mut sum = HamiltonianSummary {
        energy_drift: 0.0,
        half_energy_drift: 0.0,
        min_speed_near_circle: f64::INFINITY,
        slow_near_circle_steps: 0,
        obstruction_inf: f64::INFINITY,
        steps,
    };
    let observe = |x: [f64; 2], v: [f64; 2], sum: &mut HamiltonianSummary| {
        let r = x[0].hypot(x[1]);
        let speed2 = v[0] * v[0] + v[1] * v[1];
        let speed = speed2.sqrt();
        sum.energy_drift = sum.energy_drift.max(((literal(x, v) - e0) / e0).abs());
        sum.half_energy_drift = sum.half_energy_drift.max(((half(x, v) - h0) / h0).abs());
        if (r - 1.0).abs() <= 0.01 {
            sum.min_speed_near_circle = sum.min_speed_near_circle.min(speed);
            if speed <= 0.01 {
                sum.slow_near_circle_steps += 1;
            }
        }
        sum.obstruction_inf = sum.obstruction_inf.min((r - 1.0).abs() + (speed2 - (e0 - 1.0)).abs());
    };
    observe(x, v, &mut sum);
    let mut g = goat_grad(x);
    for n in 1..=steps {
        for d in 0..2 {
            v[d] -= 0.5 * h * g[d];
            x[d] += h * v[d];
        }
        g = goat_grad(x);
        for d in 0..2 {
            v[d] -= 0.5 * h * g[d];
        }
        if !(x.iter().chain(v.iter()).all(|c| c.is_finite())) {
            return Err(SandboxError::StepFailure { t: n as f64 * h, reason: "non-finite state".into() });
        }
        let th = lift.update(x);
        observe(x, v, &mut sum);
        if n % record_every == 0 || n == steps {
            traj.push(point(n as f64 * h, x, v, th));
        }
    }
    Ok((traj, sum))
}
