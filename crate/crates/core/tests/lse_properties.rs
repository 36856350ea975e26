mod support;

use convexreg::lse::{extend, fit, RegressionProblem, SolverConfig, Variant};
use proptest::prelude::*;
use support::*;

fn line_design(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, 1..=max_n).prop_map(|steps| {
        let mut x = 0.0;
        steps
            .iter()
            .map(|s| {
                x += s;
                x
            })
            .collect()
    })
}

fn responses(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn variant() -> impl Strategy<Value = Variant> {
    prop_oneof![
        Just(Variant::Full),
        (0.2f64..2.0).prop_map(|bound| Variant::Bounded { bound }),
        (0.0f64..3.0).prop_map(|lipschitz| Variant::Lipschitz { lipschitz }),
        (0.2f64..2.0, 0.0f64..3.0)
            .prop_map(|(bound, lipschitz)| Variant::BoundedLipschitz { bound, lipschitz }),
    ]
}

fn planar_design(max_n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 3..=max_n)
}

fn shuffled_line(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    line_design(max_n).prop_flat_map(|x| {
        let n = x.len();
        (Just(x).prop_shuffle(), responses(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_enumeration_oracle_on_tiny_lines(
        (x, y) in shuffled_line(4),
        variant in variant(),
        exact in any::<bool>(),
    ) {
        let p = line_problem(&x, &y, variant);
        let config = if exact { SolverConfig::default() } else { admm_config() };
        let f = fit(&p, &config);
        let oracle = brute_force_line(&x, &y, &vec![1.0; x.len()], variant);
        prop_assert!(max_abs_diff(&f.theta, &oracle) <= 1e-6, "{:?} vs {:?}", f.theta, oracle);
    }

    #[test]
    fn exact_and_splitting_paths_agree((x, y) in shuffled_line(30), variant in variant()) {
        let p = line_problem(&x, &y, variant);
        let a = fit(&p, &SolverConfig::default());
        let b = fit(&p, &admm_config());
        prop_assert!(a.diagnostics.converged && b.diagnostics.converged);
        prop_assert!(a.diagnostics.objective <= b.diagnostics.objective + 1e-6 * x.len() as f64);
        prop_assert!(max_abs_diff(&a.theta, &b.theta) <= 1e-4, "{:?} vs {:?}", a.theta, b.theta);
    }

    #[test]
    fn projection_is_nonexpansive(
        x in planar_design(14),
        seed in any::<u64>(),
        variant in variant(),
    ) {
        let n = x.len();
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let y1: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let y2: Vec<f64> = (0..n).map(|_| rand::Rng::random_range(&mut rng, -2.0..2.0)).collect();
        let p1 = RegressionProblem::new(x.clone(), y1, variant).unwrap();
        let p2 = p1.with_responses(y2).unwrap();
        let config = SolverConfig::default();
        let (f1, f2) = (fit(&p1, &config), fit(&p2, &config));
        let w = p1.weights();
        let dt: Vec<f64> = f1.theta.iter().zip(&f2.theta).map(|(a, b)| a - b).collect();
        let dy: Vec<f64> = p1.responses().iter().zip(p2.responses()).map(|(a, b)| a - b).collect();
        prop_assert!(weighted_norm(w, &dt) <= weighted_norm(w, &dy) + 1e-5);
    }

    #[test]
    fn classes_are_nested(x in planar_design(12), y in responses(12), b in 0.3f64..2.0, l in 0.0f64..3.0) {
        let y = &y[..x.len()];
        let config = SolverConfig::default();
        let objective = |variant| {
            let p = RegressionProblem::new(x.clone(), y.to_vec(), variant).unwrap();
            fit(&p, &config).diagnostics.objective
        };
        let full = objective(Variant::Full);
        let lip = objective(Variant::Lipschitz { lipschitz: l });
        let bounded = objective(Variant::Bounded { bound: b });
        let both = objective(Variant::BoundedLipschitz { bound: b, lipschitz: l });
        let tol = 1e-5;
        prop_assert!(full <= lip + tol && lip <= both + tol);
        prop_assert!(full <= bounded + tol && bounded <= both + tol);
    }

    #[test]
    fn affine_responses_are_reproduced(x in planar_design(15), a in -3.0f64..3.0, b in -3.0f64..3.0, c in -1.0f64..1.0) {
        let y: Vec<f64> = x.iter().map(|p| a * p[0] + b * p[1] + c).collect();
        let p = RegressionProblem::new(x, y.clone(), Variant::Full).unwrap();
        let f = fit(&p, &SolverConfig::default());
        prop_assert!(max_abs_diff(&f.theta, p.responses()) <= 1e-6);
    }

    #[test]
    fn equivariant_under_scaling_and_affine_shift(
        x in planar_design(12),
        y in responses(12),
        scale in 0.2f64..5.0,
        a in -2.0f64..2.0,
    ) {
        let y = &y[..x.len()];
        let config = SolverConfig::default();
        let base = RegressionProblem::new(x.clone(), y.to_vec(), Variant::Full).unwrap();
        let moved: Vec<f64> = x.iter().zip(y).map(|(p, v)| scale * v + a * p[0] - a * p[1]).collect();
        let other = base.with_responses(moved).unwrap();
        let (f, g) = (fit(&base, &config), fit(&other, &config));
        let expect: Vec<f64> = f
            .theta
            .iter()
            .zip(base.points())
            .map(|(t, p)| scale * t + a * p[0] - a * p[1])
            .collect();
        prop_assert!(max_abs_diff(&g.theta, &expect) <= 1e-5 * scale.max(1.0));
    }

    #[test]
    fn extension_interpolates_and_is_convex(
        x in planar_design(12),
        y in responses(12),
        variant in variant(),
        u in prop::collection::vec(0.0f64..1.0, 2),
        v in prop::collection::vec(0.0f64..1.0, 2),
        s in 0.0f64..1.0,
    ) {
        let y = &y[..x.len()];
        let p = RegressionProblem::new(x, y.to_vec(), variant).unwrap();
        let f = fit(&p, &SolverConfig::default());
        prop_assume!(f.diagnostics.converged);
        for (t, pt) in f.theta.iter().zip(p.points()) {
            prop_assert!((extend(&f, &p, pt) - t).abs() <= 1e-5);
        }
        let mid: Vec<f64> = u.iter().zip(&v).map(|(a, b)| s * a + (1.0 - s) * b).collect();
        let values = [extend(&f, &p, &u), extend(&f, &p, &v), extend(&f, &p, &mid)];
        // the upper clip of bounded classes can only bite outside the hull
        // of the design, where it breaks convexity
        let clipped = variant.bound().is_some_and(|b| values.iter().any(|e| *e >= b));
        if let Some(b) = variant.bound() {
            prop_assert!(values.iter().all(|e| e.abs() <= b));
        }
        if !clipped {
            prop_assert!(values[2] <= s * values[0] + (1.0 - s) * values[1] + 1e-12);
        }
    }
}
