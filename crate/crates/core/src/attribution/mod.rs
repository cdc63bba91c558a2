//! Path attribution estimators.
//!
//! All deterministic estimators share one kernel: gradients are evaluated at
//! the quadrature nodes of `γ`, multiplied by per-node weights, summed in
//! node order, divided by `m` and scaled by `x_i − x'_i`. Standard IG is the
//! weight `g ≡ 1` and the deterministic path-sampled estimator is the weight
//! `G`, so estimators that coincide mathematically also coincide bit-for-bit.

pub mod axioms;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::Density;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::pathgeom::PathSpec;
use crate::quadrature::Rule;
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Ig,
    Pwig,
    PsigDet,
    PsigMc,
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Estimator::Ig => "ig",
            Estimator::Pwig => "pwig",
            Estimator::PsigDet => "psig_det",
            Estimator::PsigMc => "psig_mc",
        })
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ig" => Ok(Estimator::Ig),
            "pwig" => Ok(Estimator::Pwig),
            "psig_det" | "det" => Ok(Estimator::PsigDet),
            "psig_mc" | "mc" => Ok(Estimator::PsigMc),
            other => Err(Error::Parse(format!(
                "unknown estimator `{other}` (expected ig, pwig, psig_det, psig_mc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributionResult {
    pub values: Vec<f64>,
    pub estimator: Estimator,
    /// Grid size `m`; the inner grid size for the Monte Carlo estimator.
    pub steps: usize,
    /// Number of sampled baselines (Monte Carlo only).
    pub baselines: Option<usize>,
    /// Weight or density used, e.g. `one` or `cdf:uniform`.
    pub weight: String,
    pub sum: f64,
    /// Per-feature standard error of the Monte Carlo mean.
    pub std_error: Option<Vec<f64>>,
}

impl AttributionResult {
    fn new(values: Vec<f64>, estimator: Estimator, steps: usize, weight: String) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{estimator} attribution for feature {i}"
            )));
        }
        let sum = values.iter().sum();
        Ok(Self {
            values,
            estimator,
            steps,
            baselines: None,
            weight,
            sum,
            std_error: None,
        })
    }
}

/// Nonnegative weight `g: [0, 1] → R+` on the path.
#[derive(Clone)]
pub struct WeightFn {
    descriptor: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("WeightFn").field(&self.descriptor).finish()
    }
}

impl WeightFn {
    pub fn new(
        descriptor: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            descriptor: descriptor.into(),
            f: Arc::new(f),
        }
    }

    /// `g ≡ 1`, which recovers standard IG.
    pub fn one() -> Self {
        Self::new("one", |_| 1.0)
    }

    /// `g(α) = α`, the CDF of the uniform density.
    pub fn alpha() -> Self {
        Self::new("alpha", |a| a)
    }

    /// `g = G`, the CDF of `density`.
    pub fn cdf(density: &Density) -> Self {
        let d = density.clone();
        Self::new(format!("cdf:{density}"), move |a| d.cdf_at(a))
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub fn eval(&self, alpha: f64) -> Result<f64> {
        let g = (self.f)(alpha);
        if !g.is_finite() || g < 0.0 {
            return Err(Error::InvalidWeight(format!(
                "{}({alpha}) = {g}",
                self.descriptor
            )));
        }
        Ok(g)
    }
}

impl FromStr for WeightFn {
    type Err = Error;

    /// `one`, `alpha` or `cdf:<density descriptor>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "one" => Ok(Self::one()),
            "alpha" => Ok(Self::alpha()),
            other => match other.strip_prefix("cdf:") {
                Some(d) => Ok(Self::cdf(&d.parse()?)),
                None => Err(Error::Parse(format!(
                    "unknown weight `{other}` (expected one, alpha, cdf:<density>)"
                ))),
            },
        }
    }
}

fn ensure_steps(m: usize, min: usize) -> Result<()> {
    if m < min {
        return Err(Error::InvalidArgument(format!(
            "step count must be at least {min}, got {m}"
        )));
    }
    Ok(())
}

/// Gradients of `F` at the nodes of an `m`-point rule along `γ`, stored
/// row-major as `m × n`.
#[derive(Debug, Clone)]
pub struct GradientGrid {
    nodes: Vec<f64>,
    dim: usize,
    data: Vec<f64>,
}

impl GradientGrid {
    pub fn evaluate(model: &dyn Model, path: &PathSpec, m: usize, rule: Rule) -> Result<Self> {
        path.ensure_model(model)?;
        ensure_steps(m, 1)?;
        let dim = path.dim();
        let nodes: Vec<f64> = rule.nodes(m).collect();
        let mut data = vec![0.0; m * dim];
        let mut point = vec![0.0; dim];
        for (row, &alpha) in data.chunks_exact_mut(dim).zip(&nodes) {
            path.point_into(alpha, &mut point);
            model.grad_into(&point, row);
        }
        if data.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{} gradient on the path",
                model.name()
            )));
        }
        Ok(Self { nodes, dim, data })
    }

    /// Builds a grid from externally supplied gradient rows, e.g. gradients
    /// with injected noise.
    pub fn from_rows(nodes: Vec<f64>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != nodes.len() * dim {
            return Err(Error::DimensionMismatch {
                expected: nodes.len() * dim,
                actual: data.len(),
            });
        }
        Ok(Self { nodes, dim, data })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn steps(&self) -> usize {
        self.nodes.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(x_i − x'_i) · (1/m) Σ_k w_k ∂_i F(γ(α_k))` for every feature.
    pub fn weighted_attribution(&self, delta: &[f64], weights: &[f64]) -> Vec<f64> {
        let m = self.steps();
        let mut acc = vec![0.0; self.dim];
        for (k, &w) in weights.iter().enumerate().take(m) {
            for (a, g) in acc.iter_mut().zip(self.row(k)) {
                *a += w * g;
            }
        }
        acc.iter()
            .zip(delta)
            .map(|(a, d)| d * (a / m as f64))
            .collect()
    }
}

fn weighted(
    model: &dyn Model,
    path: &PathSpec,
    weight: &WeightFn,
    m: usize,
    rule: Rule,
    estimator: Estimator,
) -> Result<AttributionResult> {
    path.ensure_model(model)?;
    ensure_steps(m, 1)?;
    let descriptor = weight.descriptor().to_string();
    if path.is_degenerate() {
        return AttributionResult::new(vec![0.0; path.dim()], estimator, m, descriptor);
    }
    let weights = rule
        .nodes(m)
        .map(|a| weight.eval(a))
        .collect::<Result<Vec<_>>>()?;
    let grid = GradientGrid::evaluate(model, path, m, rule)?;
    let values = grid.weighted_attribution(&path.delta(), &weights);
    AttributionResult::new(values, estimator, m, descriptor)
}

/// Integrated gradients on the right-endpoint grid `k/m`.
pub fn ig(model: &dyn Model, path: &PathSpec, m: usize) -> Result<AttributionResult> {
    ig_with_rule(model, path, m, Rule::RightEndpoint)
}

pub fn ig_with_rule(
    model: &dyn Model,
    path: &PathSpec,
    m: usize,
    rule: Rule,
) -> Result<AttributionResult> {
    weighted(model, path, &WeightFn::one(), m, rule, Estimator::Ig)
}

/// Path-weighted integrated gradients with weight `g`.
pub fn pwig(
    model: &dyn Model,
    path: &PathSpec,
    weight: &WeightFn,
    m: usize,
) -> Result<AttributionResult> {
    pwig_with_rule(model, path, weight, m, Rule::RightEndpoint)
}

pub fn pwig_with_rule(
    model: &dyn Model,
    path: &PathSpec,
    weight: &WeightFn,
    m: usize,
    rule: Rule,
) -> Result<AttributionResult> {
    weighted(model, path, weight, m, rule, Estimator::Pwig)
}

/// Path-sampled integrated gradients evaluated as the `G`-weighted Riemann
/// sum `(x_i − x'_i) (1/m) Σ_k G(k/m) ∂_i F(γ(k/m))`.
pub fn psig_det(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    m: usize,
) -> Result<AttributionResult> {
    psig_det_with_rule(model, path, density, m, Rule::RightEndpoint)
}

pub fn psig_det_with_rule(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    m: usize,
    rule: Rule,
) -> Result<AttributionResult> {
    weighted(
        model,
        path,
        &WeightFn::cdf(density),
        m,
        rule,
        Estimator::PsigDet,
    )
}

/// How each sampled baseline's inner path integral is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerGrid {
    /// Inner nodes `u_k = k/M` on the path from `b_s` to `x`, mapped to
    /// `α = s + u_k(1 − s)`.
    #[default]
    Reparam,
    /// As `Reparam` but with nodes `u_k = (k − 1 + U)/M` for one uniform
    /// offset `U` per baseline, which makes each inner sum unbiased.
    Jittered,
    /// Shared outer nodes `α_k = k/M`, keeping those with `α_k ≥ s`. The
    /// average over baselines then equals the `Ĝ_m`-weighted sum exactly.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McConfig {
    pub n_baselines: usize,
    pub inner_steps: usize,
    pub seed: u64,
    pub inner: InnerGrid,
}

impl McConfig {
    pub fn new(n_baselines: usize, inner_steps: usize, seed: u64) -> Self {
        Self {
            n_baselines,
            inner_steps,
            seed,
            inner: InnerGrid::Reparam,
        }
    }

    pub fn with_inner(mut self, inner: InnerGrid) -> Self {
        self.inner = inner;
        self
    }
}

/// IG of `x` against the intermediate baseline `b_s`, with the inner
/// integral on `inner_steps` nodes starting at `offset` (1 gives `k/M`).
fn baseline_ig(
    model: &dyn Model,
    path: &PathSpec,
    s: f64,
    inner_steps: usize,
    offset: Option<f64>,
    scratch: &mut (Vec<f64>, Vec<f64>),
) -> Vec<f64> {
    let (point, grad) = scratch;
    let dim = path.dim();
    let mut acc = vec![0.0; dim];
    for k in 1..=inner_steps {
        let u = match offset {
            None => Rule::RightEndpoint.node(k, inner_steps),
            Some(off) => (k as f64 - 1.0 + off) / inner_steps as f64,
        };
        let alpha = s + u * (1.0 - s);
        path.point_into(alpha, point);
        model.grad_into(point, grad);
        for (a, g) in acc.iter_mut().zip(grad.iter()) {
            *a += g;
        }
    }
    let mut b_s = vec![0.0; dim];
    path.point_into(s, &mut b_s);
    acc.iter()
        .zip(path.input())
        .zip(&b_s)
        .map(|((a, x), b)| (x - b) * (a / inner_steps as f64))
        .collect()
}

/// Mean and standard error of per-baseline attributions, reduced in index
/// order with Welford updates.
fn reduce_mean(per_baseline: &[Vec<f64>], dim: usize) -> (Vec<f64>, Option<Vec<f64>>) {
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    for (j, v) in per_baseline.iter().enumerate() {
        let count = (j + 1) as f64;
        for i in 0..dim {
            let d = v[i] - mean[i];
            mean[i] += d / count;
            m2[i] += d * (v[i] - mean[i]);
        }
    }
    let n = per_baseline.len();
    let se = (n >= 2).then(|| {
        m2.iter()
            .map(|s| (s / (n - 1) as f64 / n as f64).sqrt())
            .collect()
    });
    (mean, se)
}

/// Monte Carlo path-sampled integrated gradients: draws `s_j` from
/// `density`, computes `IG(x; b_{s_j})` for each, and averages.
///
/// Baseline `j` draws from its own substream of `seed`, so the result is the
/// same whether baselines are evaluated sequentially or in parallel.
pub fn psig_mc(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    config: McConfig,
) -> Result<AttributionResult> {
    path.ensure_model(model)?;
    ensure_steps(config.n_baselines, 1)?;
    ensure_steps(config.inner_steps, 1)?;

    let draws: Vec<(f64, Option<f64>)> = (0..config.n_baselines)
        .map(|j| {
            let mut rng = substream(config.seed, j as u64);
            let s = density.sample(&mut rng);
            let offset = match config.inner {
                InnerGrid::Jittered => Some(1.0 - rng.random::<f64>()),
                _ => None,
            };
            (s, offset)
        })
        .collect();
    let mut result = psig_from_draws(model, path, &draws, config.inner_steps, config.inner)?;
    result.weight = format!("sampled:{density}");
    Ok(result)
}

/// Averages `IG(x; b_{s_j})` over an explicit list of intermediate baseline
/// positions.
pub fn psig_from_samples(
    model: &dyn Model,
    path: &PathSpec,
    samples: &[f64],
    inner_steps: usize,
    inner: InnerGrid,
) -> Result<AttributionResult> {
    if inner == InnerGrid::Jittered {
        return Err(Error::InvalidArgument(
            "jittered inner grids need a random source; use psig_mc".into(),
        ));
    }
    path.ensure_model(model)?;
    ensure_steps(samples.len(), 1)?;
    ensure_steps(inner_steps, 1)?;
    let draws = samples
        .iter()
        .map(|&s| crate::pathgeom::unit_parameter("s", s).map(|s| (s, None)))
        .collect::<Result<Vec<_>>>()?;
    let mut result = psig_from_draws(model, path, &draws, inner_steps, inner)?;
    result.weight = format!("samples(m={})", samples.len());
    Ok(result)
}

fn psig_from_draws(
    model: &dyn Model,
    path: &PathSpec,
    draws: &[(f64, Option<f64>)],
    inner_steps: usize,
    inner: InnerGrid,
) -> Result<AttributionResult> {
    let dim = path.dim();
    let per_baseline: Vec<Vec<f64>> = if path.is_degenerate() {
        vec![vec![0.0; dim]; draws.len()]
    } else if inner == InnerGrid::Shared {
        let grid = GradientGrid::evaluate(model, path, inner_steps, Rule::RightEndpoint)?;
        let delta = path.delta();
        draws
            .par_iter()
            .map(|&(s, _)| {
                let mask: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .map(|&a| if a >= s { 1.0 } else { 0.0 })
                    .collect();
                grid.weighted_attribution(&delta, &mask)
            })
            .collect()
    } else {
        draws
            .par_iter()
            .map_init(
                || (vec![0.0; dim], vec![0.0; dim]),
                |scratch, &(s, offset)| baseline_ig(model, path, s, inner_steps, offset, scratch),
            )
            .collect()
    };

    let (mean, se) = reduce_mean(&per_baseline, dim);
    let mut result = AttributionResult::new(mean, Estimator::PsigMc, inner_steps, String::new())?;
    result.baselines = Some(draws.len());
    result.std_error = se;
    Ok(result)
}

/// `R(g) = ΔF − Σ_i PWIG_i` computed on the right-endpoint grid.
pub fn completeness_residual(
    model: &dyn Model,
    path: &PathSpec,
    weight: &WeightFn,
    m: usize,
) -> Result<f64> {
    ensure_steps(m, 2)?;
    let attr = pwig(model, path, weight, m)?;
    let delta_f = model.eval(path.input()) - model.eval(path.baseline());
    finite(delta_f - attr.sum, "completeness residual")
}

/// The residual in integration-by-parts form,
/// `ΔF − (g(1)F(γ(1)) − g(0)F(γ(0))) + ∫ g'(α) F(γ(α)) dα`, with `g'` from
/// centered differences at interior nodes and a backward difference at
/// `α = 1`.
pub fn completeness_residual_by_parts(
    model: &dyn Model,
    path: &PathSpec,
    weight: &WeightFn,
    m: usize,
) -> Result<f64> {
    path.ensure_model(model)?;
    ensure_steps(m, 2)?;
    let g = (0..=m)
        .map(|k| weight.eval(k as f64 / m as f64))
        .collect::<Result<Vec<_>>>()?;
    let f_start = model.eval(path.baseline());
    let f_end = model.eval(path.input());
    let h = 1.0 / m as f64;

    let mut point = vec![0.0; path.dim()];
    let mut integral = 0.0;
    for k in 1..=m {
        let dg = if k < m {
            (g[k + 1] - g[k - 1]) / (2.0 * h)
        } else {
            (g[m] - g[m - 1]) / h
        };
        path.point_into(k as f64 / m as f64, &mut point);
        integral += dg * model.eval(&point);
    }
    integral /= m as f64;

    let boundary = g[m] * f_end - g[0] * f_start;
    finite(
        f_end - f_start - boundary + integral,
        "integration-by-parts residual",
    )
}

/// `|Σ_i PSIG_i − (F(x) − E[F(b_s)])|` with both sides on the same grid.
///
/// The expectation uses pdf weights `p(k/m)/m` for continuous densities and
/// CDF increments `G(k/m) − G((k−1)/m)` plus the atom `G(0)` at `x'`
/// otherwise.
pub fn expected_baseline_completeness_gap(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    m: usize,
) -> Result<f64> {
    ensure_steps(m, 2)?;
    let attr = psig_det(model, path, density, m)?;

    let mut point = vec![0.0; path.dim()];
    let mut expected = 0.0;
    if density.is_continuous() {
        for a in Rule::RightEndpoint.nodes(m) {
            path.point_into(a, &mut point);
            expected += density.pdf(a)? * model.eval(&point);
        }
        expected /= m as f64;
    } else {
        let mut prev = density.cdf_at(0.0);
        expected = prev * model.eval(path.baseline());
        for k in 1..=m {
            let a = k as f64 / m as f64;
            let g = density.cdf_at(a);
            if g != prev {
                path.point_into(a, &mut point);
                expected += (g - prev) * model.eval(&point);
            }
            prev = g;
        }
    }
    let target = model.eval(path.input()) - expected;
    finite(
        (attr.sum - target).abs(),
        "expected-baseline completeness gap",
    )
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}
