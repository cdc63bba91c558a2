use proptest::prelude::*;
use psig_core::attribution::{self, McConfig};
use psig_core::model::builtin_model;
use psig_core::pathgeom::reparam_alpha;
use psig_core::{Density, PathSpec};

fn vec3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, 3)
}

fn density() -> impl Strategy<Value = Density> {
    prop_oneof![
        Just(Density::Uniform),
        Just(Density::TriangularUp),
        (1.0..4.0f64, 1.0..4.0f64).prop_map(|(a, b)| Density::beta(a, b).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn inner_path_lies_on_outer_path(s in 0.0..=1.0f64, u in 0.0..=1.0f64, x in vec3(), xp in vec3()) {
        let path = PathSpec::new(x.clone(), xp.clone()).unwrap();
        let bs = path.intermediate_baseline(s).unwrap();
        let on_path = path.gamma(reparam_alpha(s, u).unwrap()).unwrap();
        for i in 0..3 {
            let inner = bs[i] + u * (x[i] - bs[i]);
            prop_assert!((inner - on_path[i]).abs() < 1e-12);
            // x − b_s = (1 − s)(x − x')
            prop_assert!(((x[i] - bs[i]) - (1.0 - s) * (x[i] - xp[i])).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn linear_attributions_are_shift_covariant(x in vec3(), xp in vec3(), c in vec3(), d in density()) {
        let model = builtin_model("linear3").unwrap();
        let shifted = |v: &[f64]| v.iter().zip(&c).map(|(a, b)| a + b).collect::<Vec<_>>();
        let a = attribution::psig_det(model.as_ref(), &PathSpec::new(x.clone(), xp.clone()).unwrap(), &d, 200).unwrap();
        let b = attribution::psig_det(model.as_ref(), &PathSpec::new(shifted(&x), shifted(&xp)).unwrap(), &d, 200).unwrap();
        for i in 0..3 {
            prop_assert!((a.values[i] - b.values[i]).abs() < 1e-9 * (1.0 + a.values[i].abs()));
        }
    }

    #[test]
    fn path_derivative_matches_finite_differences(
        name in prop::sample::select(vec!["linear3", "quadratic3", "sigmoidal3", "mlp3_tanh"]),
        x in vec3(),
        xp in vec3(),
        alpha in 0.01..0.99f64,
    ) {
        let model = builtin_model(name).unwrap();
        let path = PathSpec::new(x, xp).unwrap();
        let h = 1e-6;
        let f = |a: f64| model.eval(&path.gamma(a).unwrap());
        let fd = (f(alpha + h) - f(alpha - h)) / (2.0 * h);
        let d = path.path_derivative(model.as_ref(), alpha).unwrap();
        prop_assert!((d - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{d} vs {fd}");
    }

    #[test]
    fn ig_completeness_within_grid_error(
        name in prop::sample::select(vec!["linear3", "quadratic3", "sigmoidal3", "mlp3_tanh"]),
        x in vec3(),
        xp in vec3(),
    ) {
        let model = builtin_model(name).unwrap();
        let path = PathSpec::new(x.clone(), xp.clone()).unwrap();
        let m = 2000;
        let r = attribution::ig(model.as_ref(), &path, m).unwrap();
        let target = model.eval(&x) - model.eval(&xp);
        // right-endpoint error is O(1/m) and the inputs are bounded
        prop_assert!((r.sum - target).abs() < 50.0 / m as f64, "{} vs {target}", r.sum);
    }

    #[test]
    fn point_mass_at_zero_is_ig(x in vec3(), xp in vec3()) {
        let model = builtin_model("mlp3_tanh").unwrap();
        let path = PathSpec::new(x, xp).unwrap();
        let ig = attribution::ig(model.as_ref(), &path, 300).unwrap();
        let pm = attribution::psig_det(model.as_ref(), &path, &Density::point_mass(0.0).unwrap(), 300).unwrap();
        prop_assert_eq!(ig.values, pm.values);
    }
}

#[test]
fn deterministic_error_scales_as_one_over_m() {
    let model = builtin_model("sigmoidal3").unwrap();
    let path = PathSpec::from_origin(vec![1.0; 3]).unwrap();
    let truth = attribution::psig_det(model.as_ref(), &path, &Density::Uniform, 200_000).unwrap();
    let scaled: Vec<f64> = [100, 1000, 10_000]
        .iter()
        .map(|&m| {
            let r = attribution::psig_det(model.as_ref(), &path, &Density::Uniform, m).unwrap();
            let err: f64 = r
                .values
                .iter()
                .zip(&truth.values)
                .map(|(a, b)| (a - b).abs())
                .sum();
            err * m as f64
        })
        .collect();
    let (lo, hi) = scaled
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
    assert!(hi / lo < 2.0, "m·error not stable: {scaled:?}");
}

#[test]
fn mc_runs_are_reproducible() {
    let model = builtin_model("quadratic3").unwrap();
    let path = PathSpec::from_origin(vec![1.0; 3]).unwrap();
    let run = |seed| {
        attribution::psig_mc(
            model.as_ref(),
            &path,
            &Density::Uniform,
            McConfig::new(500, 20, seed),
        )
        .unwrap()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3).values, run(4).values);
}
