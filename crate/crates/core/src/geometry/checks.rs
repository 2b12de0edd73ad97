//! Executable checks of the target construction. Each returns a
//! [`CheckResult`]; the CLI and the acceptance tests share them.

use super::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Soft checks are reported but do not decide the suite verdict.
    pub hard: bool,
}

impl CheckResult {
    fn at_most(name: &str, max_residual: f64, tolerance: f64) -> Self {
        Self {
            check_name: name.to_string(),
            max_residual,
            tolerance,
            pass: max_residual <= tolerance,
            hard: true,
        }
    }
}

/// Additive recurrence in two dimensions built on the plastic number; fills
/// the unit square more evenly than independent uniforms.
pub fn r2_point(n: usize) -> (f64, f64) {
    const G: f64 = 1.324_717_957_244_746;
    let a1 = 1.0 / G;
    let a2 = 1.0 / (G * G);
    let k = n as f64;
    ((0.5 + a1 * k).fract(), (0.5 + a2 * k).fract())
}

/// Every check, in a fixed order.
pub fn run_all(man: &Manifold) -> Vec<CheckResult> {
    let mut out = vec![
        pushforward_identity(1000),
        geodesic(10_001),
        geodesic_negative_control(),
        arc_length(),
    ];
    let (lower, w0, flat) = lower_bound_and_flatness(man, 1_000_000);
    out.push(lower);
    out.push(w0);
    out.push(flat);
    out.push(monotone_along_geodesic(man, 20_001));
    out.push(gradient_alignment(man, 20_001));
    out.push(identification(man, 10_000));
    out.push(plateau_constant(man));
    out.push(branch_seams(man));
    out
}

pub fn all_hard_pass(results: &[CheckResult]) -> bool {
    results.iter().filter(|c| c.hard).all(|c| c.pass)
}

/// `DPhi^T hbold DPhi = h`, componentwise relative to the size of `h`.
pub fn pushforward_identity(points: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for n in 0..points {
        let (a, b) = r2_point(n);
        let p = TorusPoint::new(0.05 + 0.9 * a, b);
        let q = phi(p).expect("w is inside the chart");
        let pulled = metric_xy(q).congruence(dphi(p));
        let h = metric_h(p);
        let scale = h.a11.abs().max(h.a22.abs());
        worst = worst.max(pulled.max_abs_diff(&h) / scale);
    }
    CheckResult::at_most("pushforward_identity", worst, 1e-10)
}

pub fn geodesic(samples: usize) -> CheckResult {
    let worst = (0..samples)
        .map(|i| -50.0 + 100.0 * i as f64 / (samples - 1) as f64)
        .map(geodesic_residual)
        .fold(0.0, f64::max);
    CheckResult::at_most("geodesic_residual", worst, 1e-9)
}

/// The curve `(0.1 s^2, s)` must be flagged. Reported as the margin by which
/// its residual at `s = 1` fails to exceed `1e-3`.
pub fn geodesic_negative_control() -> CheckResult {
    let r = geodesic_residual_of_parabola(0.1, 1.0);
    CheckResult {
        check_name: "geodesic_negative_control".into(),
        max_residual: r,
        tolerance: 1e-3,
        pass: r > 1e-3,
        hard: true,
    }
}

/// Length of `gamma` over windows of unit length, measured with the torus
/// metric and composite Simpson; must equal the parameter length.
pub fn arc_length() -> CheckResult {
    let mut worst: f64 = 0.0;
    let n = 64;
    for s0 in [-50.0, -7.5, -1.0, -0.5, 0.0, 0.3, 2.0, 49.0] {
        let h = 1.0 / n as f64;
        let speed = |s: f64| metric_h(gamma(s)).norm(gamma_dot(s));
        let mut acc = speed(s0) + speed(s0 + 1.0);
        for i in 1..n {
            let s = s0 + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * speed(s);
        }
        worst = worst.max((acc * h / 3.0 - 1.0).abs());
    }
    CheckResult::at_most("arc_length_unit_speed", worst, 1e-10)
}

/// Hard lower bound `f >= 1`, exactness on `w = 0`, and the soft flatness
/// implication `f <= 1 + 1e-9 => w <= 1e-3` (distance to the circle `w = 0`).
pub fn lower_bound_and_flatness(man: &Manifold, points: usize) -> (CheckResult, CheckResult, CheckResult) {
    let mut lower_violation: f64 = 0.0;
    let mut flat_w: f64 = 0.0;
    for n in 0..points {
        let (a, b) = r2_point(n);
        let p = TorusPoint::new(a, b);
        let v = man.f(p);
        lower_violation = lower_violation.max(1.0 - v);
        if v <= 1.0 + 1e-9 {
            flat_w = flat_w.max(p.w().min(1.0 - p.w()));
        }
    }
    let mut w0_dev: f64 = 0.0;
    for k in 0..1000 {
        let v = man.f(TorusPoint::new(0.0, k as f64 / 1000.0));
        w0_dev = w0_dev.max((v - 1.0).abs());
    }
    let lower = CheckResult::at_most("f_lower_bound", lower_violation.max(0.0), 1e-12);
    let w0 = CheckResult::at_most("f_equals_one_on_w0", w0_dev, 0.0);
    let mut flat = CheckResult::at_most("flatness_soft", flat_w, 1e-3);
    flat.hard = false;
    (lower, w0, flat)
}

/// `sgn(y) df/dy <= 0` along the geodesic, with equality only where `f = M`.
/// The residual is the largest positive value of `sgn(y) df/dy`, or 1 if a
/// vanishing slope is found off the plateau.
pub fn monotone_along_geodesic(man: &Manifold, samples: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let y = -50.0 + 100.0 * i as f64 / (samples - 1) as f64;
        let (f, df) = man.on_geodesic(y);
        let signed = if y == 0.0 { df.abs() } else { y.signum() * df };
        worst = worst.max(signed);
        if df == 0.0 && f != man.m() {
            worst = worst.max(1.0);
        }
    }
    CheckResult::at_most("monotone_along_geodesic", worst, 0.0)
}

/// Sine of the angle, in the torus metric, between the gradient of `f` and
/// `gamma'`, wherever the gradient is not negligible.
pub fn gradient_alignment(man: &Manifold, samples: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let s = -50.0 + 100.0 * i as f64 / (samples - 1) as f64;
        let p = gamma(s);
        let Some(df) = man.f_grad_torus(p) else { continue };
        let h = metric_h(p);
        let grad = h.raise(df);
        if h.norm(grad) <= 1e-12 {
            continue;
        }
        worst = worst.max(h.sin_angle(grad, gamma_dot(s)));
    }
    CheckResult::at_most("gradient_alignment", worst, 1e-8)
}

pub fn identification(man: &Manifold, points: usize) -> CheckResult {
    let mut worst: f64 = 0.0;
    for n in 0..points {
        let (a, b) = r2_point(n);
        let (x, y) = (6.0 * a - 3.0, 6.0 * b - 3.0);
        let v = man.f_xy(ChartPoint::new(x, y));
        let w = man.f_xy(ChartPoint::new(x + 1.0, y - 1.0));
        worst = worst.max((v - w).abs() / v.abs().max(1.0));
    }
    CheckResult::at_most("identification", worst, 1e-12)
}

/// `M > 2 sup f~` over the region where `f~` is used.
pub fn plateau_constant(man: &Manifold) -> CheckResult {
    let sup = sup_f_tilde_on_chi_support(2000);
    CheckResult {
        check_name: "m_exceeds_twice_sup_f_tilde".into(),
        max_residual: 2.0 * sup,
        tolerance: man.m(),
        pass: man.m() > 2.0 * sup && man.m() > 2.0,
        hard: true,
    }
}

fn nested_central_difference(g: &dyn Fn(f64) -> f64, y: f64, order: usize, h: f64) -> f64 {
    let mut binom = 1.0;
    let mut acc = 0.0;
    for i in 0..=order {
        let offset = (order as f64 / 2.0 - i as f64) * h;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        acc += sign * binom * g(y + offset);
        binom = binom * (order - i) as f64 / (i + 1) as f64;
    }
    acc / h.powi(order as i32)
}

/// The pieces of `f` on either side of each seam `u in {-1, 0, 1}` are
/// extended across it and compared along `x = 0`: value and first four
/// `y`-derivatives, nested central differences with step `1e-3`.
pub fn branch_seams(man: &Manifold) -> CheckResult {
    let seams = [
        (-1.0, Branch::PureNeg, Branch::BlendNeg),
        (0.0, Branch::BlendNeg, Branch::BlendPos),
        (1.0, Branch::BlendPos, Branch::PurePos),
    ];
    let mut worst: f64 = 0.0;
    for (y0, left, right) in seams {
        let gl = |y: f64| man.eval_branch(left, ChartPoint::new(0.0, y)).0;
        let gr = |y: f64| man.eval_branch(right, ChartPoint::new(0.0, y)).0;
        for order in 0..=4 {
            let a = nested_central_difference(&gl, y0, order, 1e-3);
            let b = nested_central_difference(&gr, y0, order, 1e-3);
            worst = worst.max((a - b).abs() / a.abs().max(b.abs()).max(1.0));
        }
    }
    CheckResult::at_most("branch_seam_smoothness", worst, 1e-4)
}
