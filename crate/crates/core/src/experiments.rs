//! Experiment drivers: attribution variance under white gradient noise and
//! the deterministic-versus-Monte-Carlo convergence study.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::attribution::{psig_det, psig_mc, GradientGrid, InnerGrid, McConfig};
use crate::density::Density;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::pathgeom::PathSpec;
use crate::quadrature::Rule;
use crate::rng::{child_seed, substream};

/// Grid used for the predicted variance ratio `∫G²`.
pub const PREDICTION_GRID: usize = 10_000;
pub const MIN_TRIALS: usize = 100;

/// I.i.d. `N(0, σ²)` perturbations added to every gradient component at
/// every grid node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseModel {
    pub sigma: f64,
    pub grid_steps: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialSample {
    pub trial: usize,
    pub ig: f64,
    pub ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReport {
    pub model_name: String,
    pub density_name: String,
    pub trials: usize,
    pub sigma: f64,
    pub grid_steps: usize,
    pub seed: u64,
    /// Zero-based index of the feature whose attribution is tracked.
    pub feature: usize,
    pub var_ig: f64,
    pub var_ps: f64,
    pub ratio: f64,
    pub predicted_ratio: f64,
    #[serde(skip)]
    pub samples: Vec<TrialSample>,
}

fn sample_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let (n, sum) = values
        .clone()
        .fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    let mean = sum / n as f64;
    values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Runs `trials` independent noisy evaluations of the path gradients and
/// records the first feature's IG and path-sampled attribution, both
/// computed from the same noisy gradients.
pub fn variance_study(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    noise: NoiseModel,
    trials: usize,
) -> Result<VarianceReport> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "variance study needs at least {MIN_TRIALS} trials, got {trials}"
        )));
    }
    if !density.is_continuous() {
        return Err(Error::InvalidArgument(format!(
            "variance study requires a continuous density, got {density}"
        )));
    }
    if !(noise.sigma > 0.0 && noise.sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise sigma must be positive, got {}",
            noise.sigma
        )));
    }
    if noise.grid_steps < 2 {
        return Err(Error::InvalidArgument(
            "noise grid needs at least 2 steps".into(),
        ));
    }
    let feature = 0;
    let m = noise.grid_steps;
    let clean = GradientGrid::evaluate(model, path, m, Rule::RightEndpoint)?;
    let delta = path.delta();
    let ones = vec![1.0; m];
    let cdf: Vec<f64> = clean.nodes().iter().map(|&a| density.cdf_at(a)).collect();

    let samples: Vec<TrialSample> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = substream(noise.seed, trial as u64);
            let mut noisy = clean.clone();
            for g in noisy.data_mut() {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *g += noise.sigma * xi;
            }
            TrialSample {
                trial,
                ig: noisy.weighted_attribution(&delta, &ones)[feature],
                ps: noisy.weighted_attribution(&delta, &cdf)[feature],
            }
        })
        .collect();

    let var_ig = sample_variance(samples.iter().map(|s| s.ig));
    let var_ps = sample_variance(samples.iter().map(|s| s.ps));
    if !(var_ig > 0.0 && var_ps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "feature {} has zero attribution variance; is x_1 = x'_1?",
            feature + 1
        )));
    }
    Ok(VarianceReport {
        model_name: model.name().to_string(),
        density_name: density.to_string(),
        trials,
        sigma: noise.sigma,
        grid_steps: m,
        seed: noise.seed,
        feature,
        var_ig,
        var_ps,
        ratio: var_ps / var_ig,
        predicted_ratio: density.l2_norm_sq_of_cdf(PREDICTION_GRID)?,
        samples,
    })
}

/// How a Monte Carlo budget of `B` gradient evaluations is divided between
/// sampled baselines and inner path steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum McSplit {
    /// `inner = max(10, round(√B))`, `baselines = ⌊B / inner⌋`, right-endpoint
    /// inner nodes.
    Balanced,
    /// A fixed number of inner steps with one random inner offset per
    /// baseline; `baselines = ⌊B / inner⌋`.
    FixedJittered { inner_steps: usize },
}

impl Default for McSplit {
    fn default() -> Self {
        McSplit::FixedJittered { inner_steps: 10 }
    }
}

impl McSplit {
    /// `(baselines, inner_steps, inner grid)` for budget `b`.
    pub fn plan(self, budget: usize) -> Result<(usize, usize, InnerGrid)> {
        let (inner, grid) = match self {
            McSplit::Balanced => (
                ((budget as f64).sqrt().round() as usize).max(10),
                InnerGrid::Reparam,
            ),
            McSplit::FixedJittered { inner_steps } => (inner_steps.max(1), InnerGrid::Jittered),
        };
        let baselines = budget / inner;
        if baselines == 0 {
            return Err(Error::InvalidArgument(format!(
                "budget {budget} is below the minimal Monte Carlo configuration ({inner} gradient evaluations)"
            )));
        }
        Ok((baselines, inner, grid))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceConfig {
    pub budgets: Vec<usize>,
    pub mc_repeats: usize,
    pub ground_truth_steps: usize,
    pub seed: u64,
    pub split: McSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergencePoint {
    /// Gradient evaluations allotted to each estimator.
    pub budget: usize,
    pub mse_det: f64,
    pub mse_mc: f64,
    pub mc_baselines: usize,
    pub mc_inner_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub model_name: String,
    pub density_name: String,
    pub config: ConvergenceConfig,
    pub ground_truth: Vec<f64>,
    pub points: Vec<ConvergencePoint>,
    pub slope_det: Option<f64>,
    pub slope_mc: Option<f64>,
}

fn squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Compares the deterministic estimator at `m = B` against the Monte Carlo
/// estimator at the same gradient budget, measuring squared Euclidean error
/// against the deterministic estimator at `ground_truth_steps`.
pub fn convergence_study(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    budgets: &[usize],
    mc_repeats: usize,
    ground_truth_steps: usize,
    seed: u64,
) -> Result<Vec<ConvergencePoint>> {
    let config = ConvergenceConfig {
        budgets: budgets.to_vec(),
        mc_repeats,
        ground_truth_steps,
        seed,
        split: McSplit::default(),
    };
    convergence_study_with(model, path, density, &config).map(|r| r.points)
}

pub fn convergence_study_with(
    model: &dyn Model,
    path: &PathSpec,
    density: &Density,
    config: &ConvergenceConfig,
) -> Result<ConvergenceReport> {
    let budgets = &config.budgets;
    let max_budget = *budgets
        .last()
        .ok_or_else(|| Error::InvalidArgument("no budgets given".into()))?;
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "budgets must be strictly ascending: {budgets:?}"
        )));
    }
    if config.ground_truth_steps < 10 * max_budget {
        return Err(Error::InvalidArgument(format!(
            "ground truth needs at least 10x the largest budget ({}), got {}",
            10 * max_budget,
            config.ground_truth_steps
        )));
    }
    if config.mc_repeats == 0 {
        return Err(Error::InvalidArgument("mc_repeats must be positive".into()));
    }
    let plans = budgets
        .iter()
        .map(|&b| config.split.plan(b))
        .collect::<Result<Vec<_>>>()?;

    let truth = psig_det(model, path, density, config.ground_truth_steps)?.values;
    let mut points = Vec::with_capacity(budgets.len());
    for (idx, (&budget, &(baselines, inner, grid))) in budgets.iter().zip(&plans).enumerate() {
        let det = psig_det(model, path, density, budget)?;
        let budget_seed = child_seed(config.seed, idx as u64);
        let mut mse_mc = 0.0;
        for r in 0..config.mc_repeats {
            let mc_config =
                McConfig::new(baselines, inner, child_seed(budget_seed, r as u64)).with_inner(grid);
            let mc = psig_mc(model, path, density, mc_config)?;
            mse_mc += squared_error(&mc.values, &truth);
        }
        points.push(ConvergencePoint {
            budget,
            mse_det: squared_error(&det.values, &truth),
            mse_mc: mse_mc / config.mc_repeats as f64,
            mc_baselines: baselines,
            mc_inner_steps: inner,
        });
    }

    let slope = |f: fn(&ConvergencePoint) -> f64| {
        let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.budget as f64, f(p))).collect();
        fit_loglog_slope(&pts).ok()
    };
    Ok(ConvergenceReport {
        model_name: model.name().to_string(),
        density_name: density.to_string(),
        config: config.clone(),
        ground_truth: truth,
        slope_det: slope(|p| p.mse_det),
        slope_mc: slope(|p| p.mse_mc),
        points,
    })
}

/// Ordinary least-squares slope of `ln y` against `ln x`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs positive finite values, got ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all x values are equal".into()));
    }
    Ok(sxy / sxx)
}
