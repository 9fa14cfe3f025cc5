//! Experiment configuration: a flat TOML file merged with command-line flags.
//!
//! Flags win over the file. Every validation failure that can be traced to a
//! file entry is reported as `path:line: message`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;
use serde_json::{json, Value};

use rglab_core::selection::{ApproxMode, Estimator, SigmaScale};

use crate::error::CliError;

/// Sample sizes of the published selection-robustness curves.
pub const DEFAULT_N_GRID: [usize; 4] = [600, 800, 1000, 1200];

/// Fewest features for which moment and KS summaries are computed.
pub const MIN_FIGURE1_FEATURES: usize = 8;

/// Environment variable consulted when neither `--workers` nor the file sets it.
pub const WORKERS_ENV: &str = "RGLAB_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    SparseLinear,
    Gaussian,
    PriorSynthetic,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::SparseLinear => "sparse_linear",
            ModelKind::Gaussian => "gaussian",
            ModelKind::PriorSynthetic => "prior_synthetic",
        }
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sparse_linear" => Ok(ModelKind::SparseLinear),
            "gaussian" => Ok(ModelKind::Gaussian),
            "prior_synthetic" => Ok(ModelKind::PriorSynthetic),
            other => Err(format!(
                "unknown model '{other}' (expected one of: sparse_linear, gaussian, prior_synthetic)"
            )),
        }
    }
}

/// Size of the worker pool. `Auto` leaves the choice to rayon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Workers {
    Auto,
    Count(usize),
}

impl Workers {
    /// Thread count for `rayon::ThreadPoolBuilder`, where 0 means "default".
    pub fn threads(&self) -> usize {
        match self {
            Workers::Auto => 0,
            Workers::Count(n) => *n,
        }
    }
}

impl FromStr for Workers {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "auto" {
            return Ok(Workers::Auto);
        }
        match s.parse::<usize>() {
            Ok(0) => Err("workers must be positive or \"auto\"".into()),
            Ok(n) => Ok(Workers::Count(n)),
            Err(_) => Err(format!("invalid worker count '{s}' (expected a positive integer or \"auto\")")),
        }
    }
}

impl fmt::Display for Workers {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Workers::Auto => f.write_str("auto"),
            Workers::Count(n) => write!(f, "{n}"),
        }
    }
}

/// The subcommand a configuration is being resolved for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Figure1,
    Figure2,
    SampleSize,
    AsymptoticCov,
}

impl CommandKind {
    pub fn name(&self) -> &'static str {
        match self {
            CommandKind::Figure1 => "figure1",
            CommandKind::Figure2 => "figure2",
            CommandKind::SampleSize => "sample-size",
            CommandKind::AsymptoticCov => "asymptotic-cov",
        }
    }

    fn needs_seed(&self) -> bool {
        !matches!(self, CommandKind::AsymptoticCov)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
enum RawWorkers {
    Count(i64),
    Named(String),
}

/// The file as written: every key optional, nothing else allowed.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: Option<String>,
    n: Option<usize>,
    n_grid: Option<Vec<usize>>,
    k: Option<usize>,
    u: Option<usize>,
    #[serde(rename = "B", alias = "replicates")]
    replicates: Option<usize>,
    seed: Option<u64>,
    mode: Option<String>,
    scale: Option<String>,
    output_dir: Option<PathBuf>,
    workers: Option<RawWorkers>,
    bins: Option<usize>,
    sigma_q: Option<f64>,
    theta: Option<f64>,
    covariance: Option<Vec<Vec<f64>>>,
    estimator: Option<String>,
    target: Option<f64>,
    n_lo: Option<usize>,
    n_hi: Option<usize>,
    resolution: Option<usize>,
}

/// Command-line values that override the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub workers: Option<Workers>,
    pub mode: Option<ApproxMode>,
    pub scale: Option<SigmaScale>,
}

/// Fully resolved and validated settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub n: usize,
    pub n_grid: Vec<usize>,
    pub k: usize,
    pub u: usize,
    pub replicates: usize,
    pub seed: Option<u64>,
    pub mode: ApproxMode,
    pub scale: SigmaScale,
    pub output_dir: PathBuf,
    pub workers: Workers,
    pub bins: Option<usize>,
    pub sigma_q: Option<f64>,
    pub theta: f64,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub estimator: Estimator,
    pub target: f64,
    pub n_lo: usize,
    pub n_hi: usize,
    pub resolution: usize,
}

impl ExperimentConfig {
    /// The seed, which validation guarantees for experiment commands.
    pub fn seed(&self) -> u64 {
        self.seed.expect("validated configuration carries a seed")
    }

    /// Settings that determine the numbers produced, for summaries.
    /// Output location and pool size are deliberately left out.
    pub fn echo(&self, command: CommandKind) -> Value {
        let mut v = json!({
            "model": self.model.as_str(),
            "seed": self.seed,
        });
        let obj = v.as_object_mut().expect("object literal");
        match command {
            CommandKind::Figure1 => {
                obj.insert("n".into(), json!(self.n));
                obj.insert("k".into(), json!(self.k));
                obj.insert("bins".into(), json!(self.bins));
                match self.model {
                    ModelKind::SparseLinear => {
                        obj.insert("u".into(), json!(self.u));
                    }
                    ModelKind::PriorSynthetic => {
                        obj.insert("sigma_q".into(), json!(self.sigma_q));
                        obj.insert("theta".into(), json!(self.theta));
                    }
                    ModelKind::Gaussian => {
                        obj.insert("covariance".into(), json!(self.covariance));
                    }
                }
            }
            CommandKind::Figure2 | CommandKind::SampleSize => {
                obj.insert("k".into(), json!(self.k));
                obj.insert("u".into(), json!(self.u));
                obj.insert("B".into(), json!(self.replicates));
                obj.insert("mode".into(), json!(self.mode.as_str()));
                obj.insert("scale".into(), json!(self.scale.as_str()));
                if command == CommandKind::Figure2 {
                    obj.insert("n_grid".into(), json!(self.n_grid));
                } else {
                    obj.insert("estimator".into(), json!(self.estimator.as_str()));
                    obj.insert("target".into(), json!(self.target));
                    obj.insert("n_lo".into(), json!(self.n_lo));
                    obj.insert("n_hi".into(), json!(self.n_hi));
                    obj.insert("resolution".into(), json!(self.resolution));
                }
            }
            CommandKind::AsymptoticCov => {
                obj.remove("seed");
                obj.insert("model".into(), json!(ModelKind::Gaussian.as_str()));
                obj.insert("covariance".into(), json!(self.covariance));
            }
        }
        v
    }

    /// [`Self::echo`] plus the run-environment settings, for manifests.
    pub fn full_echo(&self, command: CommandKind) -> Value {
        let mut v = self.echo(command);
        let obj = v.as_object_mut().expect("object");
        obj.insert("output_dir".into(), json!(self.output_dir.display().to_string()));
        obj.insert("workers".into(), json!(self.workers.to_string()));
        v
    }
}

/// Where each configuration key came from, for error messages.
struct Locator<'a> {
    path: Option<&'a Path>,
    text: &'a str,
}

impl Locator<'_> {
    /// 1-based line of `key = ...` in the file, if present.
    fn line_of(&self, key: &str) -> Option<usize> {
        self.text.lines().position(|line| {
            let line = line.trim_start();
            line.strip_prefix(key)
                .map(|rest| rest.trim_start().starts_with('='))
                .unwrap_or(false)
        })
        .map(|i| i + 1)
    }

    fn error(&self, keys: &[&str], msg: impl fmt::Display) -> CliError {
        if let Some(path) = self.path {
            for key in keys {
                if let Some(line) = self.line_of(key) {
                    return CliError::Config(format!("{}:{line}: {msg}", path.display()));
                }
            }
        }
        CliError::Config(msg.to_string())
    }
}

fn parse_toml(path: &Path, text: &str) -> Result<RawConfig, CliError> {
    toml::from_str::<RawConfig>(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(1);
        CliError::Config(format!("{}:{line}: {}", path.display(), e.message().trim()))
    })
}

/// Reads `path` (if any), applies `overrides` and checks every invariant
/// `command` relies on.
pub fn load(
    path: Option<&Path>,
    overrides: &Overrides,
    env_workers: Option<&str>,
    command: CommandKind,
) -> Result<ExperimentConfig, CliError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p)
            .map_err(|e| CliError::Config(format!("cannot read config file {}: {e}", p.display())))?,
        None => String::new(),
    };
    let raw = match path {
        Some(p) => parse_toml(p, &text)?,
        None => RawConfig::default(),
    };
    resolve(raw, &Locator { path, text: &text }, overrides, env_workers, command)
}

fn resolve(
    raw: RawConfig,
    loc: &Locator<'_>,
    ov: &Overrides,
    env_workers: Option<&str>,
    command: CommandKind,
) -> Result<ExperimentConfig, CliError> {
    let model = match &raw.model {
        Some(m) => m.parse::<ModelKind>().map_err(|e| loc.error(&["model"], e))?,
        None if command == CommandKind::AsymptoticCov => ModelKind::Gaussian,
        None => ModelKind::SparseLinear,
    };
    let mode = match (ov.mode, &raw.mode) {
        (Some(m), _) => m,
        (None, Some(s)) => s.parse().map_err(|e| loc.error(&["mode"], e))?,
        (None, None) => ApproxMode::default(),
    };
    let scale = match (ov.scale, &raw.scale) {
        (Some(s), _) => s,
        (None, Some(s)) => s.parse().map_err(|e| loc.error(&["scale"], e))?,
        (None, None) => SigmaScale::default(),
    };
    let estimator = match &raw.estimator {
        Some(s) => s.parse().map_err(|e| loc.error(&["estimator"], e))?,
        None => Estimator::Straightforward,
    };
    let workers = match (ov.workers, &raw.workers, env_workers) {
        (Some(w), _, _) => w,
        (None, Some(RawWorkers::Count(n)), _) => {
            if *n <= 0 {
                return Err(loc.error(&["workers"], "workers must be positive or \"auto\""));
            }
            Workers::Count(*n as usize)
        }
        (None, Some(RawWorkers::Named(s)), _) => s.parse().map_err(|e| loc.error(&["workers"], e))?,
        (None, None, Some(env)) => env
            .parse()
            .map_err(|e| CliError::Config(format!("{WORKERS_ENV}: {e}")))?,
        (None, None, None) => Workers::Auto,
    };

    let seed = ov.seed.or(raw.seed);
    if command.needs_seed() && seed.is_none() {
        return Err(CliError::Config(format!(
            "{} needs a seed: set `seed` in the config file or pass --seed",
            command.name()
        )));
    }

    let n = raw.n.unwrap_or(59);
    let n_grid = raw
        .n_grid
        .clone()
        .or_else(|| raw.n.map(|n| vec![n]))
        .unwrap_or_else(|| DEFAULT_N_GRID.to_vec());

    let mut cfg = ExperimentConfig {
        model,
        n,
        n_grid,
        k: raw.k.unwrap_or(20_000),
        u: raw.u.unwrap_or(100),
        replicates: raw.replicates.unwrap_or(10),
        seed,
        mode,
        scale,
        output_dir: ov
            .out
            .clone()
            .or(raw.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("rglab-output")),
        workers,
        bins: raw.bins,
        sigma_q: raw.sigma_q,
        theta: raw.theta.unwrap_or(0.0),
        covariance: raw.covariance.clone(),
        estimator,
        target: raw.target.unwrap_or(0.5),
        n_lo: raw.n_lo.unwrap_or(100),
        n_hi: raw.n_hi.unwrap_or(6400),
        resolution: raw.resolution.unwrap_or(25),
    };

    validate(&mut cfg, &raw, loc, command)?;
    Ok(cfg)
}

fn validate(cfg: &mut ExperimentConfig, raw: &RawConfig, loc: &Locator<'_>, command: CommandKind) -> Result<(), CliError> {
    let needs_sparse = matches!(command, CommandKind::Figure2 | CommandKind::SampleSize);
    if needs_sparse && cfg.model != ModelKind::SparseLinear {
        return Err(loc.error(
            &["model"],
            format!("{} supports only model = \"sparse_linear\", got \"{}\"", command.name(), cfg.model.as_str()),
        ));
    }
    if command == CommandKind::AsymptoticCov && cfg.model != ModelKind::Gaussian {
        return Err(loc.error(&["model"], "asymptotic-cov needs model = \"gaussian\""));
    }

    if let Some(b) = cfg.bins {
        if b == 0 {
            return Err(loc.error(&["bins"], "bins must be positive"));
        }
    }
    if cfg.replicates == 0 {
        return Err(loc.error(&["B", "replicates"], "B (replicate count) must be positive"));
    }
    if cfg.k == 0 {
        return Err(loc.error(&["k"], "k must be positive"));
    }

    match command {
        CommandKind::Figure1 => {
            if cfg.n < 4 {
                return Err(loc.error(&["n"], format!("n must be at least 4, got {}", cfg.n)));
            }
        }
        CommandKind::Figure2 => {
            if cfg.n_grid.is_empty() {
                return Err(loc.error(&["n_grid"], "n_grid must not be empty"));
            }
            if let Some(bad) = cfg.n_grid.iter().find(|&&n| n < 4) {
                return Err(loc.error(&["n_grid", "n"], format!("every sample size must be at least 4, got {bad}")));
            }
        }
        CommandKind::SampleSize => {
            if !(cfg.target > 0.0 && cfg.target <= 1.0) {
                return Err(loc.error(&["target"], format!("target must lie in (0, 1], got {}", cfg.target)));
            }
            if cfg.n_lo < 4 {
                return Err(loc.error(&["n_lo"], format!("n_lo must be at least 4, got {}", cfg.n_lo)));
            }
            if cfg.n_lo >= cfg.n_hi {
                return Err(loc.error(&["n_hi", "n_lo"], format!("need n_lo < n_hi, got {} >= {}", cfg.n_lo, cfg.n_hi)));
            }
            if cfg.resolution == 0 {
                return Err(loc.error(&["resolution"], "resolution must be positive"));
            }
        }
        CommandKind::AsymptoticCov => {}
    }

    match cfg.model {
        ModelKind::SparseLinear if command != CommandKind::AsymptoticCov => {
            if cfg.u == 0 || cfg.u >= cfg.k {
                return Err(loc.error(&["u", "k"], format!("need 0 < u < k, got u = {}, k = {}", cfg.u, cfg.k)));
            }
        }
        ModelKind::PriorSynthetic => match cfg.sigma_q {
            None => return Err(loc.error(&["model"], "model \"prior_synthetic\" needs sigma_q")),
            Some(s) if !(s > 0.0 && s.is_finite()) => {
                return Err(loc.error(&["sigma_q"], format!("sigma_q must be positive, got {s}")))
            }
            Some(_) if !cfg.theta.is_finite() => return Err(loc.error(&["theta"], "theta must be finite")),
            Some(_) => {}
        },
        ModelKind::Gaussian => {
            let rows = cfg
                .covariance
                .as_ref()
                .ok_or_else(|| loc.error(&["model"], "model \"gaussian\" needs a covariance matrix"))?;
            let d = rows.len();
            if d < 2 {
                return Err(loc.error(&["covariance"], "covariance must cover at least one feature and the target"));
            }
            if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
                return Err(loc.error(
                    &["covariance"],
                    format!("covariance must be square: row {} has {} entries, expected {d}", i + 1, r.len()),
                ));
            }
            if raw.k.is_some_and(|k| k != d - 1) {
                return Err(loc.error(&["k"], format!("k = {} disagrees with the {d}x{d} covariance", raw.k.unwrap())));
            }
            cfg.k = d - 1;
        }
        _ => {}
    }
    if command == CommandKind::Figure1 && cfg.k < MIN_FIGURE1_FEATURES {
        return Err(loc.error(
            &["k", "covariance"],
            format!("figure1 summarizes the feature distribution and needs k >= {MIN_FIGURE1_FEATURES}, got {}", cfg.k),
        ));
    }
    Ok(())
}
