use psig_core::experiments::{convergence_study, fit_loglog_slope, variance_study, NoiseModel};
use psig_core::model::builtin_model;
use psig_core::report;
use psig_core::{Density, PathSpec};

fn noise(sigma: f64, seed: u64) -> NoiseModel {
    NoiseModel {
        sigma,
        grid_steps: 100,
        seed,
    }
}

#[test]
fn ratio_does_not_depend_on_sigma_or_input_scale() {
    let model = builtin_model("quadratic3").unwrap();
    let unit = PathSpec::from_origin(vec![1.0; 3]).unwrap();
    let base = variance_study(
        model.as_ref(),
        &unit,
        &Density::Uniform,
        noise(1.0, 4),
        1000,
    )
    .unwrap();

    let small = variance_study(
        model.as_ref(),
        &unit,
        &Density::Uniform,
        noise(0.1, 4),
        1000,
    )
    .unwrap();
    assert!((small.ratio - base.ratio).abs() < 1e-9);
    assert!((small.var_ig / base.var_ig - 0.01).abs() < 1e-9);

    let doubled = PathSpec::from_origin(vec![2.0; 3]).unwrap();
    let wide = variance_study(
        model.as_ref(),
        &doubled,
        &Density::Uniform,
        noise(1.0, 4),
        1000,
    )
    .unwrap();
    assert!((wide.ratio - base.ratio).abs() < 1e-9);
    assert!((0.30..=0.37).contains(&wide.ratio));
}

#[test]
fn variance_study_rejects_bad_setups() {
    let model = builtin_model("linear3").unwrap();
    let path = PathSpec::from_origin(vec![1.0; 3]).unwrap();
    let point = Density::point_mass(0.0).unwrap();
    assert!(variance_study(model.as_ref(), &path, &point, noise(1.0, 1), 1000).is_err());
    assert!(variance_study(model.as_ref(), &path, &Density::Uniform, noise(1.0, 1), 99).is_err());
    assert!(variance_study(
        model.as_ref(),
        &path,
        &Density::Uniform,
        noise(0.0, 1),
        1000
    )
    .is_err());
}

#[test]
fn identical_seeds_give_identical_reports() {
    let model = builtin_model("sigmoidal3").unwrap();
    let path = PathSpec::from_origin(vec![1.0; 3]).unwrap();
    let a = convergence_study(
        model.as_ref(),
        &path,
        &Density::Uniform,
        &[10, 100, 1000],
        5,
        10_000,
        9,
    )
    .unwrap();
    let b = convergence_study(
        model.as_ref(),
        &path,
        &Density::Uniform,
        &[10, 100, 1000],
        5,
        10_000,
        9,
    )
    .unwrap();
    assert_eq!(report::to_json(&a).unwrap(), report::to_json(&b).unwrap());
}

#[test]
fn slope_fit_recovers_power_laws() {
    let pts: Vec<(f64, f64)> = [10.0, 100.0, 1000.0]
        .iter()
        .map(|&x: &f64| (x, 3.0 * x.powf(-1.5)))
        .collect();
    assert!((fit_loglog_slope(&pts).unwrap() + 1.5).abs() < 1e-12);
    assert!(fit_loglog_slope(&pts[..2]).is_err());
    assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
}
