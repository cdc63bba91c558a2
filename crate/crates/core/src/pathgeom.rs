//! Straight-line path `γ(α) = x' + α(x − x')` and its reparameterizations.

use crate::error::{Error, Result};
use crate::model::Model;

/// Slack allowed outside `[0, 1]` for path parameters; grid nodes such as
/// `k/m` can land an ulp past an endpoint.
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Validates a path parameter and clamps it into `[0, 1]`.
pub fn unit_parameter(what: &'static str, value: f64) -> Result<f64> {
    if !(-UNIT_TOLERANCE..=1.0 + UNIT_TOLERANCE).contains(&value) {
        return Err(Error::OutOfRange {
            what,
            value,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(value.clamp(0.0, 1.0))
}

/// Input `x` and baseline `x'` of equal, nonzero dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec {
    input: Vec<f64>,
    baseline: Vec<f64>,
}

impl PathSpec {
    pub fn new(input: Vec<f64>, baseline: Vec<f64>) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::InvalidArgument(
                "path dimension must be at least 1".into(),
            ));
        }
        if input.len() != baseline.len() {
            return Err(Error::DimensionMismatch {
                expected: input.len(),
                actual: baseline.len(),
            });
        }
        if input.iter().chain(&baseline).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("path endpoints".into()));
        }
        Ok(Self { input, baseline })
    }

    /// Path from the origin to `input`.
    pub fn from_origin(input: Vec<f64>) -> Result<Self> {
        let zeros = vec![0.0; input.len()];
        Self::new(input, zeros)
    }

    pub fn input(&self) -> &[f64] {
        &self.input
    }

    pub fn baseline(&self) -> &[f64] {
        &self.baseline
    }

    pub fn dim(&self) -> usize {
        self.input.len()
    }

    /// `x_i − x'_i` for every coordinate.
    pub fn delta(&self) -> Vec<f64> {
        self.input
            .iter()
            .zip(&self.baseline)
            .map(|(x, b)| x - b)
            .collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.input == self.baseline
    }

    pub(crate) fn ensure_model(&self, model: &dyn Model) -> Result<()> {
        if model.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                actual: self.dim(),
            });
        }
        Ok(())
    }

    /// Writes `γ(α)` into `out` without range checks.
    pub(crate) fn point_into(&self, alpha: f64, out: &mut [f64]) {
        for ((o, x), b) in out.iter_mut().zip(&self.input).zip(&self.baseline) {
            *o = b + alpha * (x - b);
        }
    }

    pub fn gamma(&self, alpha: f64) -> Result<Vec<f64>> {
        let alpha = unit_parameter("alpha", alpha)?;
        let mut out = vec![0.0; self.dim()];
        self.point_into(alpha, &mut out);
        Ok(out)
    }

    /// Intermediate baseline `b_s = x' + s(x − x')`; the same point as `γ(s)`.
    pub fn intermediate_baseline(&self, s: f64) -> Result<Vec<f64>> {
        let s = unit_parameter("s", s)?;
        let mut out = vec![0.0; self.dim()];
        self.point_into(s, &mut out);
        Ok(out)
    }

    /// `F'(α) = Σ_i (x_i − x'_i) ∂F(γ(α))/∂x_i`.
    pub fn path_derivative(&self, model: &dyn Model, alpha: f64) -> Result<f64> {
        self.ensure_model(model)?;
        let point = self.gamma(alpha)?;
        let grad = model.grad(&point);
        let d: f64 = self.delta().iter().zip(&grad).map(|(dx, g)| dx * g).sum();
        if !d.is_finite() {
            return Err(Error::NonFinite(format!(
                "path derivative at alpha={alpha}"
            )));
        }
        Ok(d)
    }
}

/// Maps the inner variable `u` on the path from `b_s` to `x` onto the outer
/// path variable: `α = s + u(1 − s)`, so that `b_s + u(x − b_s) = γ(α)`.
pub fn reparam_alpha(s: f64, u: f64) -> Result<f64> {
    let s = unit_parameter("s", s)?;
    let u = unit_parameter("u", u)?;
    Ok(s + u * (1.0 - s))
}
