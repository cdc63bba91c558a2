//! Computational checks of the attribution axioms for the path-sampled
//! estimator.

use std::sync::Arc;

use serde::Serialize;

use super::{completeness_residual, ig, psig_det, WeightFn};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::mlp::MlpModel;
use crate::model::{FnModel, Linear3, LinearCombination, Model, Quadratic3, SharedModel};
use crate::pathgeom::PathSpec;

pub const LINEARITY_TOL: f64 = 1e-10;
pub const INVARIANCE_TOL: f64 = 1e-12;
/// Completeness of standard IG holds up to `COMPLETENESS_FACTOR / m`.
pub const COMPLETENESS_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomOutcome {
    pub axiom: &'static str,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl AxiomOutcome {
    fn within(axiom: &'static str, discrepancy: f64, tolerance: f64) -> Self {
        Self {
            axiom,
            discrepancy,
            tolerance,
            passed: discrepancy < tolerance,
        }
    }

    fn exact(axiom: &'static str, discrepancy: f64) -> Self {
        Self {
            axiom,
            discrepancy,
            tolerance: 0.0,
            passed: discrepancy == 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub density: String,
    pub steps: usize,
    pub outcomes: Vec<AxiomOutcome>,
}

impl AxiomReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `PSIG(aF₁ + bF₂) = a·PSIG(F₁) + b·PSIG(F₂)` coordinatewise.
pub fn check_linearity(
    f1: SharedModel,
    f2: SharedModel,
    a: f64,
    b: f64,
    path: &PathSpec,
    density: &Density,
    m: usize,
) -> Result<AxiomOutcome> {
    let combined = LinearCombination::new(vec![(a, f1.clone()), (b, f2.clone())])?;
    let lhs = psig_det(&combined, path, density, m)?;
    let p1 = psig_det(f1.as_ref(), path, density, m)?;
    let p2 = psig_det(f2.as_ref(), path, density, m)?;
    let rhs: Vec<f64> = p1
        .values
        .iter()
        .zip(&p2.values)
        .map(|(u, v)| a * u + b * v)
        .collect();
    Ok(AxiomOutcome::within(
        "linearity",
        max_abs_diff(&lhs.values, &rhs),
        LINEARITY_TOL,
    ))
}

/// A feature the model ignores receives exactly zero attribution.
pub fn check_dummy(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    m: usize,
    feature: usize,
) -> Result<AxiomOutcome> {
    if feature >= model.dim() {
        return Err(Error::Misconfigured(format!(
            "dummy feature {feature} out of range for dimension {}",
            model.dim()
        )));
    }
    let r = psig_det(model, path, density, m)?;
    Ok(AxiomOutcome::exact("dummy", r.values[feature].abs()))
}

/// For `F` symmetric in `(i, j)` with `x_i = x_j` and `x'_i = x'_j`, the
/// two attributions are identical.
pub fn check_symmetry(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    m: usize,
    i: usize,
    j: usize,
) -> Result<AxiomOutcome> {
    let n = path.dim();
    if i == j || i >= n || j >= n {
        return Err(Error::Misconfigured(format!(
            "symmetry needs two distinct features below {n}, got ({i}, {j})"
        )));
    }
    if path.input()[i] != path.input()[j] || path.baseline()[i] != path.baseline()[j] {
        return Err(Error::Misconfigured(format!(
            "features {i} and {j} differ in input or baseline"
        )));
    }
    let r = psig_det(model, path, density, m)?;
    Ok(AxiomOutcome::exact(
        "symmetry",
        (r.values[i] - r.values[j]).abs(),
    ))
}

/// The point mass at 0 reproduces standard IG bit-for-bit on a shared grid.
pub fn check_ig_equivalence(model: &dyn Model, path: &PathSpec, m: usize) -> Result<AxiomOutcome> {
    let a = ig(model, path, m)?;
    let b = psig_det(model, path, &Density::PointMass(0.0), m)?;
    let identical = a
        .values
        .iter()
        .zip(&b.values)
        .all(|(x, y)| x.to_bits() == y.to_bits());
    let diff = max_abs_diff(&a.values, &b.values);
    Ok(AxiomOutcome {
        axiom: "pointmass_ig_equivalence",
        discrepancy: diff,
        tolerance: 0.0,
        passed: identical,
    })
}

/// Standard IG completeness up to quadrature error `10/m`.
pub fn check_completeness(model: &dyn Model, path: &PathSpec, m: usize) -> Result<AxiomOutcome> {
    let r = completeness_residual(model, path, &WeightFn::one(), m)?;
    Ok(AxiomOutcome::within(
        "ig_completeness",
        r.abs(),
        COMPLETENESS_FACTOR / m as f64,
    ))
}

/// Two parameterizations of the same function receive the same attribution.
pub fn check_implementation_invariance(
    a: &dyn Model,
    b: &dyn Model,
    path: &PathSpec,
    density: &Density,
    m: usize,
) -> Result<AxiomOutcome> {
    let ra = psig_det(a, path, density, m)?;
    let rb = psig_det(b, path, density, m)?;
    Ok(AxiomOutcome::within(
        "implementation_invariance",
        max_abs_diff(&ra.values, &rb.values),
        INVARIANCE_TOL,
    ))
}

/// Runs the standard scenarios:
///
/// * linearity on `2·linear3 + 3·quadratic3`,
/// * dummy on `F = x1² + x2` (feature 3 unused),
/// * symmetry on `F = x1·x2 + x3` at `x = (1, 1, 0.5)`, `x' = 0`,
/// * point-mass/IG equivalence and IG completeness on `quadratic3`,
/// * implementation invariance on the reference MLP against a copy with
///   permuted hidden units.
pub fn axiom_checks(density: &Density, m: usize) -> Result<AxiomReport> {
    let general = PathSpec::new(vec![0.9, -0.4, 1.3], vec![0.1, 0.2, -0.3])?;
    let ones = PathSpec::from_origin(vec![1.0, 1.0, 1.0])?;

    let linear: SharedModel = Arc::new(Linear3);
    let quadratic: SharedModel = Arc::new(Quadratic3);
    let dummy = FnModel::new(
        "x1^2+x2",
        3,
        |x| x[0] * x[0] + x[1],
        |x, g| {
            g[0] = 2.0 * x[0];
            g[1] = 1.0;
            g[2] = 0.0;
        },
    );
    let symmetric = FnModel::new(
        "x1*x2+x3",
        3,
        |x| x[0] * x[1] + x[2],
        |x, g| {
            g[0] = x[1];
            g[1] = x[0];
            g[2] = 1.0;
        },
    );
    let mlp = MlpModel::reference_tanh();
    let permuted = mlp
        .permute_hidden(0, &[3, 1, 0, 2])?
        .with_name("mlp3_tanh_permuted");

    let outcomes = vec![
        check_linearity(linear, quadratic.clone(), 2.0, 3.0, &general, density, m)?,
        check_dummy(&dummy, &ones, density, m, 2)?,
        check_symmetry(
            &symmetric,
            &PathSpec::from_origin(vec![1.0, 1.0, 0.5])?,
            density,
            m,
            0,
            1,
        )?,
        check_ig_equivalence(quadratic.as_ref(), &general, m)?,
        check_completeness(quadratic.as_ref(), &ones, m)?,
        check_implementation_invariance(&mlp, &permuted, &general, density, m)?,
    ];
    Ok(AxiomReport {
        density: density.to_string(),
        steps: m,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_suite_passes() {
        for d in [
            Density::Uniform,
            Density::TriangularUp,
            Density::beta(2.0, 2.0).unwrap(),
        ] {
            let report = axiom_checks(&d, 1000).unwrap();
            assert!(report.all_passed(), "{report:#?}");
            assert_eq!(report.outcomes.len(), 6);
        }
    }

    #[test]
    fn misconfigured_scenarios() {
        let lin = Linear3;
        let p = PathSpec::from_origin(vec![1.0, 2.0, 1.0]).unwrap();
        assert!(matches!(
            check_dummy(&lin, &p, &Density::Uniform, 10, 3),
            Err(Error::Misconfigured(_))
        ));
        assert!(matches!(
            check_symmetry(&lin, &p, &Density::Uniform, 10, 0, 1),
            Err(Error::Misconfigured(_))
        ));
        assert!(check_symmetry(&lin, &p, &Density::Uniform, 10, 0, 0).is_err());
        assert!(
            check_symmetry(&lin, &p, &Density::Uniform, 10, 0, 2)
                .unwrap()
                .passed
        );
    }

    #[test]
    fn dummy_detects_used_feature() {
        let lin = Linear3;
        let p = PathSpec::from_origin(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(
            !check_dummy(&lin, &p, &Density::Uniform, 10, 2)
                .unwrap()
                .passed
        );
    }
}
