//! Run configuration: command-line flags layered over an optional
//! `key = value` file, then the `PSIG_SEED` environment variable, then
//! built-in defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use psig_core::attribution::Estimator;
use psig_core::experiments::McSplit;
use psig_core::quadrature::Rule;
use psig_core::{kv, Error};

use crate::CliError;

pub const SEED_ENV: &str = "PSIG_SEED";
const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Attribute,
    Variance,
    Convergence,
    Axioms,
    Residual,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Attribute => "attribute",
            Command::Variance => "variance",
            Command::Convergence => "convergence",
            Command::Axioms => "axioms",
            Command::Residual => "residual",
        }
    }

    fn default_steps(self) -> usize {
        match self {
            Command::Variance => 100,
            _ => 1000,
        }
    }
}

/// Options shared by every subcommand. Each may also be given in the
/// `--config` file under the same name with dashes replaced by underscores.
#[derive(Args, Debug, Clone, Default)]
pub struct Options {
    /// Plain-text key = value file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model name (comma-separated list for `variance`)
    #[arg(long)]
    pub model: Option<String>,
    /// Input x as comma-separated reals [default: all ones]
    #[arg(long, allow_hyphen_values = true)]
    pub input: Option<String>,
    /// Baseline x' as comma-separated reals [default: all zeros]
    #[arg(long, allow_hyphen_values = true)]
    pub baseline: Option<String>,
    /// uniform | triangular | beta:a,b | pointmass:s0 | empirical:<file>
    #[arg(long)]
    pub density: Option<String>,
    /// Grid steps m
    #[arg(long)]
    pub steps: Option<String>,
    /// Noise trials for `variance`
    #[arg(long)]
    pub trials: Option<String>,
    /// Comma-separated gradient budgets for `convergence`
    #[arg(long)]
    pub budgets: Option<String>,
    /// Random seed [default: $PSIG_SEED or 1]
    #[arg(long)]
    pub seed: Option<String>,
    /// Gradient noise standard deviation for `variance`
    #[arg(long)]
    pub sigma: Option<String>,
    /// ig | pwig | psig_det | psig_mc for `attribute`
    #[arg(long)]
    pub estimator: Option<String>,
    /// Sampled baselines for the Monte Carlo estimator
    #[arg(long)]
    pub baselines: Option<String>,
    /// Inner path steps for the Monte Carlo estimator
    #[arg(long)]
    pub inner_steps: Option<String>,
    /// Monte Carlo repeats per budget for `convergence`
    #[arg(long)]
    pub mc_repeats: Option<String>,
    /// Ground-truth grid size for `convergence`
    #[arg(long)]
    pub ground_truth_steps: Option<String>,
    /// one | alpha | cdf:<density> (`pwig` and `residual`)
    #[arg(long)]
    pub weight: Option<String>,
    /// right | midpoint quadrature nodes
    #[arg(long)]
    pub rule: Option<String>,
    /// jittered | balanced Monte Carlo budget split for `convergence`
    #[arg(long)]
    pub mc_split: Option<String>,
    /// Register an MLP from a key = value weight file
    #[arg(long)]
    pub mlp: Option<String>,
    /// CSV output path
    #[arg(long)]
    pub csv: Option<String>,
    /// JSON summary output path
    #[arg(long)]
    pub json: Option<String>,
    /// SVG plot output path (`convergence`)
    #[arg(long)]
    pub svg: Option<String>,
}

const KEYS: &[&str] = &[
    "model",
    "input",
    "baseline",
    "density",
    "steps",
    "trials",
    "budgets",
    "seed",
    "sigma",
    "estimator",
    "baselines",
    "inner_steps",
    "mc_repeats",
    "ground_truth_steps",
    "weight",
    "rule",
    "mc_split",
    "mlp",
    "csv",
    "json",
    "svg",
];

impl Options {
    fn flag(&self, key: &str) -> Option<&String> {
        match key {
            "model" => self.model.as_ref(),
            "input" => self.input.as_ref(),
            "baseline" => self.baseline.as_ref(),
            "density" => self.density.as_ref(),
            "steps" => self.steps.as_ref(),
            "trials" => self.trials.as_ref(),
            "budgets" => self.budgets.as_ref(),
            "seed" => self.seed.as_ref(),
            "sigma" => self.sigma.as_ref(),
            "estimator" => self.estimator.as_ref(),
            "baselines" => self.baselines.as_ref(),
            "inner_steps" => self.inner_steps.as_ref(),
            "mc_repeats" => self.mc_repeats.as_ref(),
            "ground_truth_steps" => self.ground_truth_steps.as_ref(),
            "weight" => self.weight.as_ref(),
            "rule" => self.rule.as_ref(),
            "mc_split" => self.mc_split.as_ref(),
            "mlp" => self.mlp.as_ref(),
            "csv" => self.csv.as_ref(),
            "json" => self.json.as_ref(),
            "svg" => self.svg.as_ref(),
            _ => None,
        }
    }
}

fn parse_split(s: &str) -> Result<McSplit, Error> {
    match s {
        "balanced" => Ok(McSplit::Balanced),
        "jittered" => Ok(McSplit::default()),
        other => match other.strip_prefix("jittered:") {
            Some(n) => n
                .parse()
                .map(|inner_steps| McSplit::FixedJittered { inner_steps })
                .map_err(|e| Error::Parse(format!("mc_split `{other}`: {e}"))),
            None => Err(Error::Parse(format!(
                "unknown mc_split `{other}` (expected jittered, jittered:<inner>, balanced)"
            ))),
        },
    }
}

fn split_name(s: McSplit) -> String {
    match s {
        McSplit::Balanced => "balanced".into(),
        McSplit::FixedJittered { inner_steps } => format!("jittered:{inner_steps}"),
    }
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub models: Vec<String>,
    pub input: Option<Vec<f64>>,
    pub baseline: Option<Vec<f64>>,
    pub density: String,
    pub steps: usize,
    pub trials: usize,
    pub budgets: Vec<usize>,
    pub seed: u64,
    pub sigma: f64,
    pub estimator: Estimator,
    pub baselines: usize,
    pub inner_steps: usize,
    pub mc_repeats: usize,
    pub ground_truth_steps: usize,
    pub weight: Option<String>,
    pub rule: Rule,
    pub mc_split: McSplit,
    pub mlp: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

struct Layers<'a> {
    flags: &'a Options,
    file: BTreeMap<String, String>,
}

impl Layers<'_> {
    fn raw(&self, key: &str) -> Option<String> {
        self.flags
            .flag(key)
            .cloned()
            .or_else(|| self.file.get(key).cloned())
    }

    fn parse<T>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.trim().parse().map_err(|e| {
                CliError::validation(format!("--{}: `{v}`: {e}", key.replace('_', "-")))
            }),
        }
    }

    fn list<T>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                kv::parse_list(&v)
                    .map_err(|e| CliError::validation(format!("--{}: {e}", key.replace('_', "-"))))
            })
            .transpose()
    }
}

impl RunConfig {
    pub fn resolve(command: Command, flags: &Options) -> Result<Self, CliError> {
        let file = match &flags.config {
            None => BTreeMap::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
                let map = kv::parse_map(&text)
                    .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
                if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
                    return Err(CliError::validation(format!(
                        "{}: unknown key `{bad}`",
                        path.display()
                    )));
                }
                map
            }
        };
        let layers = Layers { flags, file };

        let env_seed = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|e| CliError::validation(format!("{SEED_ENV}=`{v}`: {e}")))?,
            Err(_) => DEFAULT_SEED,
        };
        let default_model = match command {
            Command::Convergence => "sigmoidal3",
            _ => "quadratic3",
        };
        let models: Vec<String> = layers
            .raw("model")
            .unwrap_or_else(|| default_model.to_string())
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        if models.is_empty() {
            return Err(CliError::validation("--model is empty"));
        }
        if models.len() > 1 && command != Command::Variance {
            return Err(CliError::validation(format!(
                "`{}` takes a single model, got {}",
                command.name(),
                models.len()
            )));
        }

        let config = Self {
            command,
            models,
            input: layers.list("input")?,
            baseline: layers.list("baseline")?,
            density: layers.raw("density").unwrap_or_else(|| "uniform".into()),
            steps: layers.parse("steps", command.default_steps())?,
            trials: layers.parse("trials", 1000)?,
            budgets: layers
                .list("budgets")?
                .unwrap_or_else(|| vec![10, 100, 1000, 10_000]),
            seed: layers.parse("seed", env_seed)?,
            sigma: layers.parse("sigma", 1.0)?,
            estimator: layers.parse("estimator", Estimator::PsigDet)?,
            baselines: layers.parse("baselines", 1000)?,
            inner_steps: layers.parse("inner_steps", 100)?,
            mc_repeats: layers.parse("mc_repeats", 20)?,
            ground_truth_steps: layers.parse("ground_truth_steps", 100_000)?,
            weight: layers.raw("weight"),
            rule: layers.parse("rule", Rule::RightEndpoint)?,
            mc_split: match layers.raw("mc_split") {
                None => McSplit::default(),
                Some(s) => {
                    parse_split(s.trim()).map_err(|e| CliError::validation(e.to_string()))?
                }
            },
            mlp: layers.raw("mlp").map(PathBuf::from),
            csv: layers.raw("csv").map(PathBuf::from),
            json: layers.raw("json").map(PathBuf::from),
            svg: layers.raw("svg").map(PathBuf::from),
        };
        if config.steps == 0 {
            return Err(CliError::validation("--steps must be positive"));
        }
        Ok(config)
    }

    /// One-line `key=value` rendering of every resolved setting, in a fixed
    /// order; recorded in output metadata.
    pub fn describe(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut parts = vec![
            format!("command={}", self.command.name()),
            format!("model={}", self.models.join(",")),
            format!(
                "input={}",
                self.input
                    .as_deref()
                    .map(join)
                    .unwrap_or_else(|| "ones".into())
            ),
            format!(
                "baseline={}",
                self.baseline
                    .as_deref()
                    .map(join)
                    .unwrap_or_else(|| "zeros".into())
            ),
            format!("density={}", self.density),
            format!("steps={}", self.steps),
            format!("rule={}", self.rule),
        ];
        match self.command {
            Command::Attribute => {
                parts.push(format!("estimator={}", self.estimator));
                if let Some(w) = &self.weight {
                    parts.push(format!("weight={w}"));
                }
                if self.estimator == Estimator::PsigMc {
                    parts.push(format!("baselines={}", self.baselines));
                    parts.push(format!("inner_steps={}", self.inner_steps));
                }
            }
            Command::Variance => {
                parts.push(format!("trials={}", self.trials));
                parts.push(format!("sigma={:?}", self.sigma));
            }
            Command::Convergence => {
                let b: Vec<String> = self.budgets.iter().map(|b| b.to_string()).collect();
                parts.push(format!("budgets={}", b.join(",")));
                parts.push(format!("mc_repeats={}", self.mc_repeats));
                parts.push(format!("ground_truth_steps={}", self.ground_truth_steps));
                parts.push(format!("mc_split={}", split_name(self.mc_split)));
            }
            Command::Residual => {
                if let Some(w) = &self.weight {
                    parts.push(format!("weight={w}"));
                }
            }
            Command::Axioms => {}
        }
        if let Some(m) = &self.mlp {
            parts.push(format!("mlp={}", m.display()));
        }
        parts.push(format!("seed={}", self.seed));
        parts.join(" ")
    }
}
