//! Differentiable scalar models with exact gradients.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mlp::MlpModel;

/// A differentiable scalar function `F: R^n -> R` with an exact gradient.
///
/// Implementations must be pure: the same input always yields bit-identical
/// output, and they must be safe to call from many threads at once.
pub trait Model: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64]) -> f64;

    /// Writes `∂F/∂x_i` into `out`, which has length `dim()`.
    fn grad_into(&self, x: &[f64], out: &mut [f64]);

    fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.grad_into(x, &mut out);
        out
    }
}

pub type SharedModel = Arc<dyn Model>;

impl fmt::Debug for dyn Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Model")
            .field("name", &self.name())
            .field("dim", &self.dim())
            .finish()
    }
}

/// Numerically stable logistic function.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `F(x) = x1 + x2 + x3`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Linear3;

impl Model for Linear3 {
    fn name(&self) -> &str {
        "linear3"
    }

    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> f64 {
        x[0] + x[1] + x[2]
    }

    fn grad_into(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(1.0);
    }
}

/// `F(x) = x1² + x1·x2 + x3²`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Quadratic3;

impl Model for Quadratic3 {
    fn name(&self) -> &str {
        "quadratic3"
    }

    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> f64 {
        x[0] * x[0] + x[0] * x[1] + x[2] * x[2]
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * x[0] + x[1];
        out[1] = x[0];
        out[2] = 2.0 * x[2];
    }
}

/// `F(x) = σ(10(x̄ − 0.5))` where `x̄` is the mean of the three coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sigmoidal3;

impl Sigmoidal3 {
    const STEEPNESS: f64 = 10.0;

    fn logit(x: &[f64]) -> f64 {
        let mean = (x[0] + x[1] + x[2]) / 3.0;
        Self::STEEPNESS * (mean - 0.5)
    }
}

impl Model for Sigmoidal3 {
    fn name(&self) -> &str {
        "sigmoidal3"
    }

    fn dim(&self) -> usize {
        3
    }

    fn eval(&self, x: &[f64]) -> f64 {
        logistic(Self::logit(x))
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        let s = logistic(Self::logit(x));
        let d = Self::STEEPNESS / 3.0 * s * (1.0 - s);
        out.fill(d);
    }
}

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type GradFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A model assembled from a pair of closures.
pub struct FnModel {
    name: String,
    dim: usize,
    eval: Box<EvalFn>,
    grad: Box<GradFn>,
}

impl FnModel {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            eval: Box::new(eval),
            grad: Box::new(grad),
        }
    }
}

impl Model for FnModel {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        (self.grad)(x, out)
    }
}

/// `F = Σ_k c_k F_k` over models of a common dimension.
pub struct LinearCombination {
    name: String,
    dim: usize,
    terms: Vec<(f64, SharedModel)>,
}

impl LinearCombination {
    pub fn new(terms: Vec<(f64, SharedModel)>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty linear combination".into()))?;
        let dim = first.1.dim();
        for (_, m) in &terms {
            if m.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: m.dim(),
                });
            }
        }
        let name = terms
            .iter()
            .map(|(c, m)| format!("{c}*{}", m.name()))
            .collect::<Vec<_>>()
            .join("+");
        Ok(Self { name, dim, terms })
    }
}

impl Model for LinearCombination {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(c, m)| c * m.eval(x)).sum()
    }

    fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut scratch = vec![0.0; self.dim];
        for (c, m) in &self.terms {
            m.grad_into(x, &mut scratch);
            for (o, g) in out.iter_mut().zip(&scratch) {
                *o += c * g;
            }
        }
    }
}

/// Named collection of models. Starts with the analytic built-ins and the
/// reference 3-4-1 tanh network; further MLPs can be registered at runtime.
#[derive(Clone)]
pub struct ModelRegistry {
    models: BTreeMap<String, SharedModel>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            models: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut reg = Self::empty();
        reg.register(Arc::new(Linear3));
        reg.register(Arc::new(Quadratic3));
        reg.register(Arc::new(Sigmoidal3));
        reg.register(Arc::new(MlpModel::reference_tanh()));
        reg
    }

    /// Adds a model under its own name, replacing any previous entry.
    pub fn register(&mut self, model: SharedModel) {
        self.models.insert(model.name().to_string(), model);
    }

    pub fn names(&self) -> Vec<String> {
        self.models.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<SharedModel> {
        self.models
            .get(name)
            .cloned()
            .ok_or_else(|| Error::UnknownModel {
                name: name.to_string(),
                available: self.names(),
            })
    }

    pub fn iter(&self) -> impl Iterator<Item = &SharedModel> {
        self.models.values()
    }
}

/// Looks up a model in the default registry.
pub fn builtin_model(name: &str) -> Result<SharedModel> {
    ModelRegistry::with_builtins().get(name)
}

/// Maximum over coordinates of `|grad_i − cd_i| / max(1, |cd_i|)` where
/// `cd_i` is the central difference of `eval` with the given step.
pub fn check_gradient(model: &dyn Model, point: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    if point.len() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            actual: point.len(),
        });
    }
    if point.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient check point {point:?}")));
    }

    let analytic = model.grad(point);
    let mut probe = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        probe[i] = point[i] + step;
        let hi = model.eval(&probe);
        probe[i] = point[i] - step;
        let lo = model.eval(&probe);
        probe[i] = point[i];
        if !hi.is_finite() || !lo.is_finite() {
            return Err(Error::NonFinite(format!(
                "{} at perturbed coordinate {i}",
                model.name()
            )));
        }
        let central = (hi - lo) / (2.0 * step);
        let err = (analytic[i] - central).abs() / central.abs().max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}
