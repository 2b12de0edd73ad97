//! Property tests spanning the solver and the diagnostics.

use proptest::prelude::*;
use crate::diagnostics::{char_fields, char_fields_report, cover_fraction, degree};
use crate::solver::{FieldState, OuterGhost, RadialGrid, Workspace};
use crate::{Manifold, Solver};

fn bumped_state(grid: &RadialGrid, c: f64, scale: f64, amp: [f64; 4]) -> FieldState {
    let mut s = FieldState::zeros(grid.cells());
    for j in 0..grid.cells() {
        let r = grid.r(j);
        let b = (-(r - 2.0).powi(2)).exp();
        s.y[j] = c + amp[0] * b;
        s.y_t[j] = amp[1] * b;
        s.alpha[j] = 2.0 * (r / scale).atan() + amp[2] * b * r;
        s.alpha_t[j] = amp[3] * b * r;
    }
    s
}

fn solver_for(grid: RadialGrid, c: f64, scale: f64) -> Solver {
    let ghost = OuterGhost { y: c, alpha: 2.0 * ((grid.r_max() + 0.5 * grid.dr()) / scale).atan() };
    Solver::new(grid, Manifold::default(), ghost, 0.5).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_is_time_reversible(
        c in -1.5f64..1.5,
        scale in 0.5f64..2.0,
        a0 in -0.2f64..0.2, a1 in -0.2f64..0.2, a2 in -0.2f64..0.2, a3 in -0.2f64..0.2,
    ) {
        let grid = RadialGrid::new(12.0, 240).unwrap();
        let solver = solver_for(grid, c, scale);
        let s0 = bumped_state(&grid, c, scale, [a0, a1, a2, a3]);
        let dt = solver.max_dt();
        let mut ws = Workspace::default();
        let mut s = s0.clone();
        for _ in 0..50 {
            solver.step_in_place(&mut s, dt, &mut ws).unwrap();
        }
        for _ in 0..50 {
            solver.step_in_place(&mut s, -dt, &mut ws).unwrap();
        }
        prop_assert!(s.max_abs_diff(&s0) < 1e-10, "{}", s.max_abs_diff(&s0));
    }

    #[test]
    fn characteristic_fields_obey_cauchy_schwarz(
        c in -3.0f64..3.0,
        scale in 0.3f64..3.0,
        a0 in -0.5f64..0.5, a1 in -0.5f64..0.5, a2 in -0.5f64..0.5, a3 in -0.5f64..0.5,
    ) {
        let grid = RadialGrid::new(10.0, 200).unwrap();
        let solver = solver_for(grid, c, scale);
        let s = bumped_state(&grid, c, scale, [a0, a1, a2, a3]);
        let rep = char_fields_report(&char_fields(&solver, &s));
        prop_assert!(rep.m_exceeds_e <= 1e-12);
        prop_assert!(rep.negative_char <= 1e-12);
        prop_assert!(rep.l_bound <= 1e-9);
    }

    #[test]
    fn energy_error_is_second_order_in_dt(
        c in -1.5f64..1.5,
        a1 in -0.1f64..0.1, a3 in -0.1f64..0.1,
    ) {
        let grid = RadialGrid::new(12.0, 240).unwrap();
        let solver = solver_for(grid, c, 1.0);
        let s0 = bumped_state(&grid, c, 1.0, [0.0, a1, 0.0, a3]);
        let e0 = solver.energy(&s0);
        let drift = |dt: f64| {
            let mut s = s0.clone();
            let mut ws = Workspace::default();
            let mut worst: f64 = 0.0;
            for _ in 0..(2.0 / dt).round() as usize {
                solver.step_in_place(&mut s, dt, &mut ws).unwrap();
                worst = worst.max((solver.energy(&s) / e0 - 1.0).abs());
            }
            (worst, degree(&s))
        };
        let (coarse, d1) = drift(solver.max_dt());
        let (fine, d2) = drift(0.5 * solver.max_dt());
        prop_assert!(coarse < 5e-3, "{coarse}");
        prop_assert!(fine <= coarse / 2.5 + 1e-12, "{coarse} {fine}");
        prop_assert_eq!((d1, d2), (1, 1));
    }

    #[test]
    fn cover_fraction_is_a_measure(ys in prop::collection::vec(-3.0f64..3.0, 0..40)) {
        let f = cover_fraction(&ys);
        prop_assert!((0.0..=1.0).contains(&f));
        let mut longer = ys.clone();
        longer.push(ys.last().copied().unwrap_or(0.0) + 0.3);
        prop_assert!(cover_fraction(&longer) + 1e-12 >= f);
    }
}
