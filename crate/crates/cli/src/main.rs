mod config;
mod svg;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use psig_core::attribution::{self, axioms, Estimator, McConfig, WeightFn};
use psig_core::experiments::{self, ConvergenceConfig, NoiseModel};
use psig_core::report::{self, fmt_f64, CsvTable};
use psig_core::{Density, MlpModel, ModelRegistry, PathSpec, SharedModel};

use config::{Command, Options, RunConfig};

#[derive(Parser)]
#[command(
    name = "psig",
    version,
    about = "Path-sampled integrated gradients experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Attribute one model output to its input features
    Attribute(Options),
    /// Compare attribution variance of IG and PS-IG under gradient noise
    Variance(Options),
    /// Error against gradient budget for the deterministic and Monte Carlo estimators
    Convergence(Options),
    /// Run the axiom checks for a density
    Axioms(Options),
    /// Completeness residual of a weighted path attribution, computed two ways
    Residual(Options),
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    message: String,
    validation: bool,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            validation: true,
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            validation: false,
        }
    }

    fn exit_code(&self) -> u8 {
        if self.validation {
            1
        } else {
            2
        }
    }
}

impl From<psig_core::Error> for CliError {
    fn from(e: psig_core::Error) -> Self {
        Self {
            validation: e.is_validation(),
            message: e.to_string(),
        }
    }
}

/// Everything a run produces, held in memory until all of it is ready.
#[derive(Default)]
struct Output {
    stdout: String,
    files: Vec<(PathBuf, String)>,
}

fn metadata(config: &RunConfig) -> String {
    format!("psig {} {}", env!("CARGO_PKG_VERSION"), config.describe())
}

fn registry(config: &RunConfig) -> Result<ModelRegistry, CliError> {
    let mut reg = ModelRegistry::with_builtins();
    if let Some(path) = &config.mlp {
        let mlp = MlpModel::from_config_file(path)?;
        reg.register(std::sync::Arc::new(mlp));
    }
    Ok(reg)
}

fn path_for(model: &SharedModel, config: &RunConfig) -> Result<PathSpec, CliError> {
    let dim = model.dim();
    let input = config.input.clone().unwrap_or_else(|| vec![1.0; dim]);
    let baseline = config.baseline.clone().unwrap_or_else(|| vec![0.0; dim]);
    for (what, v) in [("input", &input), ("baseline", &baseline)] {
        if v.len() != dim {
            return Err(CliError::validation(format!(
                "--{what} has {} values but model `{}` takes {dim}",
                v.len(),
                model.name()
            )));
        }
    }
    Ok(PathSpec::new(input, baseline)?)
}

fn density(config: &RunConfig) -> Result<Density, CliError> {
    Ok(config.density.parse()?)
}

fn json(value: &impl serde::Serialize) -> Result<String, CliError> {
    report::to_json(value).map_err(|e| CliError::runtime(e.to_string()))
}

fn attribute(config: &RunConfig) -> Result<Output, CliError> {
    let reg = registry(config)?;
    let model = reg.get(&config.models[0])?;
    let path = path_for(&model, config)?;
    let m = config.steps;
    let result = match config.estimator {
        Estimator::Ig => attribution::ig_with_rule(model.as_ref(), &path, m, config.rule)?,
        Estimator::Pwig => {
            let w: WeightFn = config.weight.as_deref().unwrap_or("one").parse()?;
            attribution::pwig_with_rule(model.as_ref(), &path, &w, m, config.rule)?
        }
        Estimator::PsigDet => attribution::psig_det_with_rule(
            model.as_ref(),
            &path,
            &density(config)?,
            m,
            config.rule,
        )?,
        Estimator::PsigMc => {
            let mc = McConfig::new(config.baselines, config.inner_steps, config.seed);
            attribution::psig_mc(model.as_ref(), &path, &density(config)?, mc)?
        }
    };

    let mut out = Output::default();
    let _ = writeln!(
        out.stdout,
        "model={} estimator={} weight={} steps={}",
        model.name(),
        result.estimator,
        result.weight,
        result.steps
    );
    let _ = writeln!(out.stdout, "{:<8} {:>14}", "feature", "attribution");
    for (i, v) in result.values.iter().enumerate() {
        match &result.std_error {
            Some(se) => {
                let _ = writeln!(out.stdout, "{:<8} {v:>14.6} +/- {:.6}", i + 1, se[i]);
            }
            None => {
                let _ = writeln!(out.stdout, "{:<8} {v:>14.6}", i + 1);
            }
        }
    }
    let _ = writeln!(out.stdout, "{:<8} {:>14.6}", "sum", result.sum);

    if let Some(p) = &config.csv {
        let mut t = CsvTable::new(metadata(config), &["feature", "attribution", "std_error"]);
        for (i, v) in result.values.iter().enumerate() {
            let se = result
                .std_error
                .as_ref()
                .map(|s| fmt_f64(s[i]))
                .unwrap_or_default();
            t.push(vec![(i + 1).to_string(), fmt_f64(*v), se]);
        }
        out.files.push((p.clone(), t.render()));
    }
    if let Some(p) = &config.json {
        out.files.push((p.clone(), json(&result)?));
    }
    Ok(out)
}

fn variance(config: &RunConfig) -> Result<Output, CliError> {
    let reg = registry(config)?;
    let d = density(config)?;
    let noise = NoiseModel {
        sigma: config.sigma,
        grid_steps: config.steps,
        seed: config.seed,
    };
    let mut reports = Vec::new();
    for name in &config.models {
        let model = reg.get(name)?;
        let path = path_for(&model, config)?;
        reports.push(experiments::variance_study(
            model.as_ref(),
            &path,
            &d,
            noise,
            config.trials,
        )?);
    }

    let mut out = Output::default();
    let _ = writeln!(
        out.stdout,
        "density={} steps={} trials={} sigma={}",
        d, config.steps, config.trials, config.sigma
    );
    let _ = writeln!(
        out.stdout,
        "{:<14} | {:>12} | {:>12} | {:>7} | {:>9}",
        "Function", "Var(IG)", "Var(PS-IG)", "Ratio", "Predicted"
    );
    for r in &reports {
        let _ = writeln!(
            out.stdout,
            "{:<14} | {:>12.6} | {:>12.6} | {:>7.4} | {:>9.4}",
            r.model_name, r.var_ig, r.var_ps, r.ratio, r.predicted_ratio
        );
    }

    if let Some(p) = &config.csv {
        let mut t = CsvTable::new(metadata(config), &["model", "trial", "ig", "psig"]);
        for r in &reports {
            for s in &r.samples {
                t.push(vec![
                    r.model_name.clone(),
                    s.trial.to_string(),
                    fmt_f64(s.ig),
                    fmt_f64(s.ps),
                ]);
            }
        }
        out.files.push((p.clone(), t.render()));
    }
    if let Some(p) = &config.json {
        out.files.push((p.clone(), json(&reports)?));
    }
    Ok(out)
}

fn convergence(config: &RunConfig) -> Result<Output, CliError> {
    let reg = registry(config)?;
    let model = reg.get(&config.models[0])?;
    let path = path_for(&model, config)?;
    let d = density(config)?;
    let cc = ConvergenceConfig {
        budgets: config.budgets.clone(),
        mc_repeats: config.mc_repeats,
        ground_truth_steps: config.ground_truth_steps,
        seed: config.seed,
        split: config.mc_split,
    };
    let r = experiments::convergence_study_with(model.as_ref(), &path, &d, &cc)?;

    let mut out = Output::default();
    let _ = writeln!(
        out.stdout,
        "model={} density={} repeats={} ground_truth_steps={}",
        r.model_name, r.density_name, cc.mc_repeats, cc.ground_truth_steps
    );
    let _ = writeln!(
        out.stdout,
        "{:>8} | {:>12} | {:>12} | {:>14}",
        "budget", "MSE det", "MSE MC", "MC split"
    );
    for p in &r.points {
        let _ = writeln!(
            out.stdout,
            "{:>8} | {:>12.4e} | {:>12.4e} | {:>6} x {:<5}",
            p.budget, p.mse_det, p.mse_mc, p.mc_baselines, p.mc_inner_steps
        );
    }
    let slope = |s: Option<f64>| s.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
    let _ = writeln!(
        out.stdout,
        "log-log slope: deterministic {}, Monte Carlo {}",
        slope(r.slope_det),
        slope(r.slope_mc)
    );

    if let Some(p) = &config.csv {
        out.files.push((
            p.clone(),
            report::convergence_csv(&r, &metadata(config)).render(),
        ));
    }
    if let Some(p) = &config.json {
        out.files.push((p.clone(), json(&r)?));
    }
    if let Some(p) = &config.svg {
        let series = [
            svg::Series {
                label: "deterministic".into(),
                points: r
                    .points
                    .iter()
                    .map(|p| (p.budget as f64, p.mse_det))
                    .collect(),
            },
            svg::Series {
                label: "Monte Carlo".into(),
                points: r
                    .points
                    .iter()
                    .map(|p| (p.budget as f64, p.mse_mc))
                    .collect(),
            },
        ];
        let title = format!("{} / {}", r.model_name, r.density_name);
        let text = svg::render_loglog(
            &title,
            "gradient evaluations",
            "mean squared error",
            &series,
        )
        .map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
        out.files.push((p.clone(), text));
    }
    Ok(out)
}

fn axioms_cmd(config: &RunConfig) -> Result<Output, CliError> {
    let d = density(config)?;
    let r = axioms::axiom_checks(&d, config.steps)?;
    let mut out = Output::default();
    let _ = writeln!(out.stdout, "density={} steps={}", r.density, r.steps);
    let _ = writeln!(
        out.stdout,
        "{:<26} | {:>12} | {:>12} | result",
        "axiom", "discrepancy", "tolerance"
    );
    for o in &r.outcomes {
        let _ = writeln!(
            out.stdout,
            "{:<26} | {:>12.3e} | {:>12.3e} | {}",
            o.axiom,
            o.discrepancy,
            o.tolerance,
            if o.passed { "pass" } else { "FAIL" }
        );
    }
    if let Some(p) = &config.csv {
        let mut t = CsvTable::new(
            metadata(config),
            &["axiom", "discrepancy", "tolerance", "passed"],
        );
        for o in &r.outcomes {
            t.push(vec![
                o.axiom.to_string(),
                fmt_f64(o.discrepancy),
                fmt_f64(o.tolerance),
                o.passed.to_string(),
            ]);
        }
        out.files.push((p.clone(), t.render()));
    }
    if let Some(p) = &config.json {
        out.files.push((p.clone(), json(&r)?));
    }
    if !r.all_passed() {
        let failed: Vec<&str> = r
            .outcomes
            .iter()
            .filter(|o| !o.passed)
            .map(|o| o.axiom)
            .collect();
        print!("{}", out.stdout);
        return Err(CliError::runtime(format!(
            "axiom checks failed: {}",
            failed.join(", ")
        )));
    }
    Ok(out)
}

fn residual(config: &RunConfig) -> Result<Output, CliError> {
    let reg = registry(config)?;
    let model = reg.get(&config.models[0])?;
    let path = path_for(&model, config)?;
    let m = config.steps;
    let w: WeightFn = config.weight.as_deref().unwrap_or("alpha").parse()?;
    let direct = attribution::completeness_residual(model.as_ref(), &path, &w, m)?;
    let by_parts = attribution::completeness_residual_by_parts(model.as_ref(), &path, &w, m)?;
    let d = density(config)?;
    let gap = attribution::expected_baseline_completeness_gap(model.as_ref(), &path, &d, m)?;

    let mut out = Output::default();
    let _ = writeln!(
        out.stdout,
        "model={} weight={} density={} steps={m}",
        model.name(),
        w.descriptor(),
        d
    );
    let _ = writeln!(out.stdout, "residual (direct)     {direct:.6e}");
    let _ = writeln!(out.stdout, "residual (by parts)   {by_parts:.6e}");
    let _ = writeln!(
        out.stdout,
        "difference            {:.6e}",
        (direct - by_parts).abs()
    );
    let _ = writeln!(out.stdout, "expected-baseline gap {gap:.6e}");

    if let Some(p) = &config.csv {
        let mut t = CsvTable::new(metadata(config), &["quantity", "value"]);
        t.push(vec!["residual_direct".into(), fmt_f64(direct)]);
        t.push(vec!["residual_by_parts".into(), fmt_f64(by_parts)]);
        t.push(vec!["expected_baseline_gap".into(), fmt_f64(gap)]);
        out.files.push((p.clone(), t.render()));
    }
    if let Some(p) = &config.json {
        #[derive(serde::Serialize)]
        struct Residual<'a> {
            model: &'a str,
            weight: &'a str,
            density: String,
            steps: usize,
            residual_direct: f64,
            residual_by_parts: f64,
            expected_baseline_gap: f64,
        }
        out.files.push((
            p.clone(),
            json(&Residual {
                model: model.name(),
                weight: w.descriptor(),
                density: d.to_string(),
                steps: m,
                residual_direct: direct,
                residual_by_parts: by_parts,
                expected_baseline_gap: gap,
            })?,
        ));
    }
    Ok(out)
}

/// Writes every file or none: on the first failure the files already
/// written in this run are removed.
fn write_all(files: &[(PathBuf, String)]) -> Result<(), CliError> {
    for (i, (path, text)) in files.iter().enumerate() {
        if let Err(e) = std::fs::write(path, text) {
            for (done, _) in &files[..i] {
                let _ = std::fs::remove_file(done);
            }
            return Err(CliError::runtime(format!("{}: {e}", path.display())));
        }
    }
    Ok(())
}

fn run(command: Command, options: &Options) -> Result<(), CliError> {
    let config = RunConfig::resolve(command, options)?;
    let out = match command {
        Command::Attribute => attribute(&config)?,
        Command::Variance => variance(&config)?,
        Command::Convergence => convergence(&config)?,
        Command::Axioms => axioms_cmd(&config)?,
        Command::Residual => residual(&config)?,
    };
    write_all(&out.files)?;
    print!("{}", out.stdout);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (command, options) = match &cli.command {
        Cmd::Attribute(o) => (Command::Attribute, o),
        Cmd::Variance(o) => (Command::Variance, o),
        Cmd::Convergence(o) => (Command::Convergence, o),
        Cmd::Axioms(o) => (Command::Axioms, o),
        Cmd::Residual(o) => (Command::Residual, o),
    };
    match run(command, options) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("psig {}: {e}", command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
