use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use wolfebfgs::analysis::potential::{omega, psi};
use wolfebfgs::analysis::{DeltaConstants, WeightScheme};
use wolfebfgs::objective::sample_point;
use wolfebfgs::*;

fn spd(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |i, j| entries[(i * d + j) % entries.len()]);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn omega_is_nonnegative(x in -0.999_f64..1e3) {
        prop_assert!(omega(x).unwrap() >= 0.0);
    }

    #[test]
    fn psi_is_nonnegative(d in 1usize..6, entries in prop::collection::vec(-2.0_f64..2.0, 36)) {
        let a = spd(d, &entries);
        prop_assert!(psi(&a).unwrap() >= -1e-10);
    }

    #[test]
    fn delta_constants_are_ordered(alpha in 0.01_f64..0.49, gap in 0.01_f64..0.98) {
        let beta = alpha + gap * (1.0 - alpha);
        prop_assume!(beta < 1.0 && beta > alpha);
        let c = DeltaConstants::new(alpha, beta).unwrap();
        prop_assert!(c.d1 > 0.0 && c.d1 <= 1.0 / 6.0);
        prop_assert!(c.d2 < 1.0 && c.d2 >= 7.0 / 8.0);
        prop_assert!(c.d3 > 1.0);
        prop_assert!(2.0 * c.d2 - 1.0 - c.d1 > 0.0);
        prop_assert!(c.as_array().iter().all(|v| v.is_finite() && *v > 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn update_satisfies_secant_in_both_forms(
        d in 2usize..7,
        entries in prop::collection::vec(-1.0_f64..1.0, 49),
        seed in any::<u64>(),
    ) {
        let a = spd(d, &entries);
        let s = sample_point(d, 1.0, seed);
        let y = &a * &s;
        for form in [Form::Direct, Form::Inverse] {
            let mut st = BfgsState::new(&DMatrix::identity(d, d), form).unwrap();
            st.update(&s, &y).unwrap();
            let b = st.b_matrix().unwrap();
            let err = (&b * &s - &y).norm() / y.norm();
            prop_assert!(err < 1e-8, "{form:?}: {err}");
        }
    }

    #[test]
    fn weighted_inner_products_are_invariant(
        d in 2usize..7,
        entries in prop::collection::vec(-1.0_f64..1.0, 49),
        seed in any::<u64>(),
    ) {
        let w = WeightScheme::custom(spd(d, &entries)).unwrap();
        let g = sample_point(d, 1.0, seed);
        let s = sample_point(d, 1.0, seed.wrapping_add(1));
        let lhs = w.lower(&g).dot(&w.lift(&s));
        let scale = w.lower(&g).norm() * w.lift(&s).norm();
        prop_assert!((lhs - g.dot(&s)).abs() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn cubic_gradient_matches_finite_differences(
        d in 2usize..12,
        kappa in 2.0_f64..1e3,
        delta in 0.05_f64..3.0,
        seed in any::<u64>(),
    ) {
        let p = Problem::make_cubic(d, kappa, delta, 1.0).unwrap();
        let x = sample_point(d, 2.0, seed);
        prop_assert!(p.finite_diff_grad_check(&x, 1e-6).unwrap() < 1e-5);
    }

    #[test]
    fn accepted_steps_satisfy_weak_wolfe(
        eigs in prop::collection::vec(0.01_f64..100.0, 1..6),
        scale in 1e-3_f64..1e3,
        alpha in 0.01_f64..0.45,
        beta_off in 0.05_f64..0.9,
    ) {
        let beta = alpha + beta_off * (1.0 - alpha);
        prop_assume!(beta < 0.999);
        let params = WolfeParams::new(alpha, beta).unwrap();
        let p = Problem::quadratic(eigs.clone()).unwrap();
        let x = DVector::from_element(eigs.len(), 1.0);
        let (f0, g0) = p.value_and_gradient(&x);
        let dir = -&g0 * scale;
        let gd0 = g0.dot(&dir);
        let r = log_bisection(&p, &x, &dir, f0, gd0, &params).unwrap();
        let xn = &x + &dir * r.eta;
        let (fe, ge) = p.value_and_gradient(&xn);
        prop_assert!(linesearch::armijo_holds(f0, gd0, fe, r.eta, alpha).unwrap());
        prop_assert!(linesearch::curvature_holds(ge.dot(&dir), gd0, beta).unwrap());
        prop_assert!(r.evals >= r.loops);
    }
}
