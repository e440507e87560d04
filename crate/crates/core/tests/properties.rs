use proptest::prelude::*;

use westcat_core::analysis::poincare_constant;
use westcat_core::energy::{acoustic_energy_report, thermal_energy_report, AcousticDerivs, ThermalDerivs};
use westcat_core::grid::{face_gradient, gradient_sq, l2_inner, l2_sq, laplacian, norms, Grid, GridFunction};
use westcat_core::linalg::{
    assemble_operator, cg_solve, direct_tridiagonal_solve, MassWeights, SparseOperator,
};
use westcat_core::medium::{eval_medium, q_source, MediumParams};

fn grid_strategy() -> impl Strategy<Value = Grid> {
    prop_oneof![
        (3usize..40, 0.5f64..3.0).prop_map(|(n, l)| Grid::new(1, &[l], &[n]).unwrap()),
        (3usize..12, 3usize..12, 0.5f64..2.0, 0.5f64..2.0)
            .prop_map(|(a, b, lx, ly)| Grid::new(2, &[lx, ly], &[a, b]).unwrap()),
        (3usize..6, 3usize..6, 3usize..6).prop_map(|(a, b, c)| Grid::new(3, &[1.0, 1.5, 0.7], &[a, b, c]).unwrap()),
    ]
}

fn field(grid: &Grid, seed: &[f64]) -> GridFunction {
    let values = (0..grid.len()).map(|i| seed[i % seed.len()] * (1.0 + 0.1 * (i as f64).sin())).collect();
    GridFunction::from_values(grid, values).unwrap()
}

fn grid_and_two_fields() -> impl Strategy<Value = (Grid, GridFunction, GridFunction)> {
    (grid_strategy(), prop::collection::vec(-1.0f64..1.0, 7..13), prop::collection::vec(-1.0f64..1.0, 5..11))
        .prop_map(|(g, a, b)| {
            let u = field(&g, &a);
            let v = field(&g, &b);
            (g, u, v)
        })
}

fn face_inner(u: &GridFunction, v: &GridFunction) -> f64 {
    (0..u.grid().dim())
        .map(|a| face_gradient(u, a).iter().zip(face_gradient(v, a)).map(|(x, y)| x * y).sum::<f64>())
        .sum::<f64>()
        * u.grid().cell_volume()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn laplacian_is_symmetric_and_nonpositive((_g, u, v) in grid_and_two_fields()) {
        let a = l2_inner(&laplacian(&u), &v);
        let b = l2_inner(&u, &laplacian(&v));
        prop_assert!((a - b).abs() <= 1e-9 * (a.abs() + b.abs() + 1.0));
        prop_assert!(l2_inner(&laplacian(&u), &u) <= 1e-12);
    }

    #[test]
    fn summation_by_parts((_g, u, v) in grid_and_two_fields()) {
        let lhs = -l2_inner(&laplacian(&u), &v);
        let rhs = face_inner(&u, &v);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (lhs.abs() + 1.0));
        let self_term = -l2_inner(&laplacian(&u), &u);
        prop_assert!((self_term - gradient_sq(&u)).abs() <= 1e-9 * (self_term.abs() + 1.0));
    }

    #[test]
    fn assembled_operator_is_symmetric(g in grid_strategy(), w in 0.01f64..10.0, sigma in 0.0f64..5.0) {
        let op = assemble_operator(MassWeights::Uniform(w), sigma, &g).unwrap();
        prop_assert!(op.is_symmetric(0.0));
    }

    #[test]
    fn poincare_holds((g, u, _v) in grid_and_two_fields()) {
        let cp = poincare_constant(&g).unwrap();
        let lhs = l2_sq(&u).sqrt();
        prop_assert!(lhs <= cp * gradient_sq(&u).sqrt() * (1.0 + 1e-9));
    }

    #[test]
    fn norms_are_homogeneous((_g, u, _v) in grid_and_two_fields(), alpha in -5.0f64..5.0) {
        let a = norms(&u);
        let b = norms(&u.scale(alpha));
        let s = alpha.abs();
        for (x, y) in [(a.l2, b.l2), (a.l4, b.l4), (a.linf, b.linf), (a.h1_semi, b.h1_semi)] {
            prop_assert!((y - s * x).abs() <= 1e-12 * (s * x + 1e-300));
        }
    }

    #[test]
    fn heat_source_scales_quadratically((_g, u, _v) in grid_and_two_fields(), alpha in -5.0f64..5.0, b in 0.1f64..3.0) {
        let params = MediumParams { b, ..MediumParams::default() };
        let q1 = q_source(&params, &u);
        let q2 = q_source(&params, &u.scale(alpha));
        prop_assert!(q1.values().iter().all(|&v| v >= 0.0));
        for (x, y) in q1.values().iter().zip(q2.values()) {
            prop_assert!((y - alpha * alpha * x).abs() <= 1e-12 * (alpha * alpha * x + 1e-300));
        }
    }

    #[test]
    fn h_tilde_is_the_shifted_speed(coeffs in prop::collection::vec(-0.2f64..0.2, 0..4), theta in -1.0f64..1.0) {
        let params = MediumParams { speed_poly: coeffs, h1: 1e-3, ..MediumParams::default() };
        let e0 = eval_medium(&params, 0.0).unwrap();
        prop_assert_eq!(e0.h_tilde, 0.0);
        let e = eval_medium(&params, theta).unwrap();
        prop_assert!((e.h - e0.h - e.h_tilde).abs() <= 1e-14);
        prop_assert!((e.k * params.rho * e.h - params.beta).abs() <= 1e-12);
    }

    #[test]
    fn cg_agrees_with_thomas(n in 2usize..200, w in 0.0f64..5.0, sigma in 0.01f64..3.0, seed in prop::collection::vec(-1.0f64..1.0, 3..9)) {
        let g = Grid::unit_interval(n).unwrap();
        let op = assemble_operator(MassWeights::Uniform(w + 1e-3), sigma, &g).unwrap();
        let b = field(&g, &seed);
        let direct = direct_tridiagonal_solve(&op, b.values()).unwrap();
        let (x, report) = cg_solve(&op, b.values(), 1e-12, 10 * n + 100).unwrap();
        prop_assert!(report.converged);
        let gap = x.iter().zip(&direct).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = direct.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        prop_assert!(gap <= 1e-8 * scale.max(1.0), "gap {}", gap);
    }

    #[test]
    fn energy_functionals_scale_quadratically_for_unit_weight(
        (g, u, v) in grid_and_two_fields(),
        alpha in -4.0f64..4.0,
    ) {
        let params = MediumParams { beta: 0.0, ..MediumParams::default() };
        let w = u.zip_map(&v, |a, b| a * b);
        let th = ThermalDerivs { theta: u.clone(), theta_t: v.clone(), theta_tt: w.clone() };
        let th_s = ThermalDerivs { theta: u.scale(alpha), theta_t: v.scale(alpha), theta_tt: w.scale(alpha) };
        let ac = AcousticDerivs { p: v.clone(), p_t: u.clone(), p_tt: w.clone(), p_ttt: Some(u.clone()) };
        let ac_s = AcousticDerivs { p: v.scale(alpha), p_t: u.scale(alpha), p_tt: w.scale(alpha), p_ttt: Some(u.scale(alpha)) };
        let zero = GridFunction::zeros(&g);
        let (t1, t2) = (thermal_energy_report(&th, &params), thermal_energy_report(&th_s, &params));
        let a1 = acoustic_energy_report(&ac, &zero, &params).unwrap();
        let a2 = acoustic_energy_report(&ac_s, &zero, &params).unwrap();
        let a2f = alpha * alpha;
        let pairs = [
            (t1.e0, t2.e0), (t1.e1, t2.e1), (t1.total, t2.total),
            (t1.d0, t2.d0), (t1.d1, t2.d1), (t1.d_total, t2.d_total),
            (a1.e1, a2.e1), (a1.e2, a2.e2), (a1.d1, a2.d1), (a1.d2, a2.d2),
        ];
        for (x, y) in pairs {
            prop_assert!(x >= 0.0);
            prop_assert!((y - a2f * x).abs() <= 1e-10 * (a2f * x + 1e-300));
        }
        prop_assert_eq!((a2.min_coeff, a2.max_coeff), (1.0, 1.0));
    }

    #[test]
    fn dissipation_dominates_poincare_bound((g, u, v) in grid_and_two_fields(), kappa in 0.01f64..2.0, tau in 0.0f64..1.0) {
        let params = MediumParams { kappa_a: kappa, tau, ..MediumParams::default() };
        let th = ThermalDerivs { theta: u.clone(), theta_t: v.clone(), theta_tt: GridFunction::zeros(&g) };
        let r = thermal_energy_report(&th, &params);
        let lambda = 1.0 / poincare_constant(&g).unwrap().powi(2);
        prop_assert!(r.d0 >= (kappa * lambda + params.ell()) * l2_sq(&u) * (1.0 - 1e-9));
    }
}

#[test]
fn negative_laplacian_matches_laplacian_action() {
    let g = Grid::new(2, &[1.0, 2.0], &[6, 5]).unwrap();
    let u = g.sample(|x| x[0] * x[1] + (3.0 * x[0]).sin());
    let a = SparseOperator::negative_laplacian(&g).apply(u.values());
    let b = laplacian(&u);
    for (x, y) in a.iter().zip(b.values()) {
        assert!((x + y).abs() < 1e-10 * (1.0 + y.abs()));
    }
}
