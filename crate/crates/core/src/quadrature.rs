//! Small numerical helpers: compensated summation, adaptive Gauss–Kronrod
//! quadrature, and local Lagrange interpolation on uniform grids.

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let x = h * XGK[i];
        let s = f(c - x) + f(c + x);
        kron += WGK[i] * s;
        if i % 2 == 1 {
            gauss += WG[i / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive 7/15-point Gauss–Kronrod on a finite interval, bisecting the
/// interval with the largest error estimate until the total estimate drops
/// below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let mut pieces = vec![{
        let (v, e) = gk15(f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let total: f64 = compensated_sum(pieces.iter().map(|p| p.2));
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
    compensated_sum(pieces.iter().map(|p| p.2))
}

/// `int_0^inf f(r) dr` through `r = s / (1 - s)`.
pub fn integrate_half_line(f: &dyn Fn(f64) -> f64, rel_tol: f64, abs_tol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s;
        let v = f(s / d) / (d * d);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(&g, 0.0, 1.0, rel_tol, abs_tol)
}

/// Four-point Lagrange interpolation of samples on the uniform grid
/// `x_j = x0 + j h`. `sample(j)` may be asked for indices outside
/// `0..n`, which lets the caller supply reflected ghost values.
pub fn lagrange4(sample: &dyn Fn(isize) -> f64, x0: f64, h: f64, n: usize, x: f64) -> f64 {
    let t = (x - x0) / h;
    let base = (t.floor() as isize - 1).min(n as isize - 3);
    let mut acc = 0.0;
    for i in 0..4 {
        let xi = (base + i) as f64;
        let mut w = 1.0;
        for k in 0..4 {
            if k != i {
                let xk = (base + k) as f64;
                w *= (t - xk) / (xi - xk);
            }
        }
        acc += w * sample(base + i);
    }
    acc
}

/// Linear interpolation on the uniform grid `x_j = x0 + j h`, clamped at the
/// ends.
pub fn linear_uniform(values: &[f64], x0: f64, h: f64, x: f64) -> f64 {
    let n = values.len();
    let t = (x - x0) / h;
    if t <= 0.0 {
        return values[0];
    }
    if t >= (n - 1) as f64 {
        return values[n - 1];
    }
    let j = t.floor() as usize;
    let frac = t - j as f64;
    values[j] + frac * (values[j + 1] - values[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn compensated_beats_naive() {
        let mut vals = vec![1.0];
        vals.extend(std::iter::repeat_n(1e-16, 10_000));
        let naive: f64 = vals.iter().sum();
        let good = compensated_sum(vals.iter().copied());
        assert_eq!(naive, 1.0);
        assert!((good - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn gauss_kronrod_polynomial_exact() {
        let v = integrate(&|x| x.powi(9) - 3.0 * x * x, -1.0, 2.0, 1e-14, 0.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 - (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn half_line_integrals() {
        let v = integrate_half_line(&|r| 4.0 * r / (1.0 + r * r).powi(2), 1e-12, 0.0);
        assert!((v - 2.0).abs() < 1e-10);
        let v = integrate_half_line(&|r| (-r).exp(), 1e-12, 0.0);
        assert!((v - 1.0).abs() < 1e-10);
        let v = integrate(&|x| x.sin(), 0.0, PI, 1e-12, 0.0);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lagrange_reproduces_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let h = 0.1;
        let sample = |j: isize| f(j as f64 * h);
        for x in [0.05, 0.33, 0.71, 0.95] {
            assert!((lagrange4(&sample, 0.0, h, 11, x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn linear_clamps() {
        let v = [0.0, 1.0, 4.0];
        assert_eq!(linear_uniform(&v, 0.0, 1.0, -1.0), 0.0);
        assert_eq!(linear_uniform(&v, 0.0, 1.0, 1.5), 2.5);
        assert_eq!(linear_uniform(&v, 0.0, 1.0, 9.0), 4.0);
    }
}
