//! Flat `key = value` experiment configuration.
//!
//! A config file holds one pair per line; `#` starts a comment. Values
//! given with `--set key=value` are applied after the file, so the
//! command line wins over the file, which wins over the defaults.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use crate::deconv::{BlindOptions, KernelKind, ModuleChoice, NonblindOptions};
use crate::error::{FimaError, Result};
use crate::modules::{Denoiser, ExternalDenoiser, RecursiveFilter, TvDenoiser};
use crate::prox::PenaltyKind;
use crate::solvers::{PenaltyRule, Schedule, Scheme, SolverConfig, StepRule, StepRules, ToleranceRule};

/// Every knob of every subcommand. Keys are the field names.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub scheme: Scheme,
    /// `identity`, `af`, `tv`, `rf` or `external`.
    pub module: String,
    pub penalty: PenaltyKind,
    pub lambda: f64,
    pub tau: f64,
    pub levels: usize,

    pub max_iters: usize,
    pub tol: f64,
    /// `gamma = step_factor / L` unless `gamma` is set.
    pub step_factor: f64,
    pub gamma: Option<f64>,
    /// `mu = mu_factor / gamma` unless `mu` is set.
    pub mu_factor: f64,
    pub mu: Option<f64>,
    /// `C = c_fraction * mu` unless `c` is set.
    pub c_fraction: f64,
    pub c: Option<f64>,

    pub tv_weight: f64,
    pub tv_iters: usize,
    pub rf_sigma: f64,
    pub external_cmd: String,
    pub external_timeout_s: f64,

    pub kernel_size: usize,
    pub scales: usize,
    pub lambda_x: f64,
    pub lambda_b: f64,
    pub tau_x: f64,
    pub tau_b: f64,
    pub sweeps: usize,
    pub mu_factor_b: f64,
    pub edge_threshold: f64,
    pub init_sigma: f64,
    /// Solve-blind only: also deblur `y` with the estimated kernel.
    pub recover: bool,

    pub size: usize,
    pub synthetic_kernel: String,
    pub synthetic_kernel_size: Option<usize>,
    pub noise: f64,

    pub schemes: Vec<Scheme>,
    pub modules: Vec<String>,
    pub instances: usize,
    /// Record wall-clock columns (trace `wall_ms`, bench `time_s`). Off by
    /// default so reruns are byte-identical.
    pub timing: bool,

    pub peak: f64,

    pub input: Option<PathBuf>,
    pub kernel: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub kernel_truth: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let blind = BlindOptions::default();
        Self {
            seed: 0,
            scheme: Scheme::Ifima,
            module: "tv".into(),
            penalty: PenaltyKind::L0,
            lambda: 1e-4,
            tau: 1e-3,
            levels: 3,
            max_iters: 80,
            tol: 1e-4,
            step_factor: 0.99,
            gamma: None,
            mu_factor: 1.0,
            mu: None,
            c_fraction: 0.25,
            c: None,
            tv_weight: 0.01,
            tv_iters: 20,
            rf_sigma: 1.0,
            external_cmd: String::new(),
            external_timeout_s: 30.0,
            kernel_size: blind.kernel_size,
            scales: blind.scales,
            lambda_x: blind.lambda_x,
            lambda_b: blind.lambda_b,
            tau_x: blind.tau_x,
            tau_b: blind.tau_b,
            sweeps: blind.sweeps_per_scale,
            mu_factor_b: blind.mu_factor_b,
            edge_threshold: blind.edge_threshold,
            init_sigma: blind.init_sigma,
            recover: false,
            size: 64,
            synthetic_kernel: "gaussian".into(),
            synthetic_kernel_size: None,
            noise: 0.01,
            schemes: vec![Scheme::Pg, Scheme::Efima, Scheme::Ifima],
            modules: vec!["identity".into(), "tv".into()],
            instances: 3,
            timing: false,
            peak: 1.0,
            input: None,
            kernel: None,
            truth: None,
            kernel_truth: None,
            out: PathBuf::from("."),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| FimaError::Parse(format!("{key}: cannot parse `{value}`: {e}")))
}

fn flag(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(FimaError::Parse(format!("{key}: expected a boolean, got `{value}`"))),
    }
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    if value.is_empty() || value.eq_ignore_ascii_case("auto") {
        Ok(None)
    } else {
        num(key, value).map(Some)
    }
}

fn list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_ascii_lowercase).collect()
}

fn path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

/// Splits `key=value`, trimming both sides.
pub fn split_pair(pair: &str) -> Result<(&str, &str)> {
    let (k, v) = pair
        .split_once('=')
        .ok_or_else(|| FimaError::Parse(format!("expected key=value, got `{pair}`")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(FimaError::Parse(format!("empty key in `{pair}`")));
    }
    Ok((k, v.trim()))
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = num(key, value)?,
            "scheme" => self.scheme = Scheme::parse(value)?,
            "module" => self.module = value.to_ascii_lowercase(),
            "penalty" => self.penalty = PenaltyKind::parse(value)?,
            "lambda" => self.lambda = num(key, value)?,
            "tau" => self.tau = num(key, value)?,
            "levels" => self.levels = num(key, value)?,
            "max_iters" => self.max_iters = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "step_factor" => self.step_factor = num(key, value)?,
            "gamma" => self.gamma = optional(key, value)?,
            "mu_factor" => self.mu_factor = num(key, value)?,
            "mu" => self.mu = optional(key, value)?,
            "c_fraction" => self.c_fraction = num(key, value)?,
            "c" => self.c = optional(key, value)?,
            "tv_weight" => self.tv_weight = num(key, value)?,
            "tv_iters" => self.tv_iters = num(key, value)?,
            "rf_sigma" => self.rf_sigma = num(key, value)?,
            "external_cmd" => self.external_cmd = value.to_string(),
            "external_timeout_s" => self.external_timeout_s = num(key, value)?,
            "kernel_size" => self.kernel_size = num(key, value)?,
            "scales" => self.scales = num(key, value)?,
            "lambda_x" => self.lambda_x = num(key, value)?,
            "lambda_b" => self.lambda_b = num(key, value)?,
            "tau_x" => self.tau_x = num(key, value)?,
            "tau_b" => self.tau_b = num(key, value)?,
            "sweeps" => self.sweeps = num(key, value)?,
            "mu_factor_b" => self.mu_factor_b = num(key, value)?,
            "edge_threshold" => self.edge_threshold = num(key, value)?,
            "init_sigma" => self.init_sigma = num(key, value)?,
            "recover" => self.recover = flag(key, value)?,
            "size" => self.size = num(key, value)?,
            "synthetic_kernel" => self.synthetic_kernel = value.to_ascii_lowercase(),
            "synthetic_kernel_size" => self.synthetic_kernel_size = optional(key, value)?,
            "noise" => self.noise = num(key, value)?,
            "schemes" => self.schemes = list(value).iter().map(|s| Scheme::parse(s)).collect::<Result<_>>()?,
            "modules" => self.modules = list(value),
            "instances" => self.instances = num(key, value)?,
            "timing" => self.timing = flag(key, value)?,
            "peak" => self.peak = num(key, value)?,
            "input" => self.input = path(value),
            "kernel" => self.kernel = path(value),
            "truth" => self.truth = path(value),
            "kernel_truth" => self.kernel_truth = path(value),
            "out" => self.out = PathBuf::from(value),
            other => return Err(FimaError::InvalidArgument(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Applies every pair of a config file's text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = split_pair(line).map_err(|e| FimaError::Parse(format!("line {}: {e}", n + 1)))?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut cfg = Self::default();
        if let Some(f) = file {
            let text = std::fs::read_to_string(f)
                .map_err(|e| FimaError::InvalidArgument(format!("cannot read config {}: {e}", f.display())))?;
            cfg.apply_text(&text)?;
        }
        for pair in overrides {
            let (k, v) = split_pair(pair)?;
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn step_rules(&self) -> StepRules {
        StepRules {
            step: match self.gamma {
                Some(g) => StepRule::Fixed(Schedule::Constant(g)),
                None => StepRule::InverseLipschitz(self.step_factor),
            },
            mu: match self.mu {
                Some(m) => PenaltyRule::Fixed(Schedule::Constant(m)),
                None => PenaltyRule::TimesInverseStep(self.mu_factor),
            },
            tolerance: match self.c {
                Some(c) => ToleranceRule::Fixed(Schedule::Constant(c)),
                None => ToleranceRule::FractionOfMu(self.c_fraction),
            },
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::default().with_max_iters(self.max_iters).with_tol(self.tol).with_rules(self.step_rules())
    }

    pub fn nonblind_options(&self) -> NonblindOptions {
        NonblindOptions {
            penalty: self.penalty,
            lambda: self.lambda,
            tau: self.tau,
            max_levels: self.levels,
            solver: self.solver_config(),
        }
    }

    pub fn blind_options(&self) -> BlindOptions {
        BlindOptions {
            kernel_size: self.kernel_size,
            scales: self.scales,
            lambda_x: self.lambda_x,
            lambda_b: self.lambda_b,
            tau_x: self.tau_x,
            tau_b: self.tau_b,
            sweeps_per_scale: self.sweeps,
            tol: self.tol,
            mu_factor_b: self.mu_factor_b,
            edge_threshold: self.edge_threshold,
            init_sigma: self.init_sigma,
            use_modules: self.module != "identity",
        }
    }

    pub fn synthetic_kind(&self) -> Result<KernelKind> {
        KernelKind::parse(&self.synthetic_kernel, self.synthetic_kernel_size)
    }

    /// The denoiser named `name`, `None` for `identity` and `af`.
    pub fn denoiser(&self, name: &str) -> Result<Option<Arc<dyn Denoiser>>> {
        Ok(match name {
            "identity" | "af" => None,
            "tv" => Some(Arc::new(TvDenoiser::new(self.tv_weight, self.tv_iters))),
            "rf" => Some(Arc::new(RecursiveFilter::new(self.rf_sigma))),
            "external" => {
                if !(self.external_timeout_s > 0.0 && self.external_timeout_s.is_finite()) {
                    return Err(FimaError::InvalidConfig("external_timeout_s must be positive".into()));
                }
                Some(Arc::new(
                    ExternalDenoiser::new(&self.external_cmd)?
                        .with_timeout(Duration::from_secs_f64(self.external_timeout_s)),
                ))
            }
            other => return Err(FimaError::InvalidArgument(format!("unknown module `{other}`"))),
        })
    }

    pub fn module_choice(&self, name: &str) -> Result<ModuleChoice> {
        Ok(match (name, self.denoiser(name)?) {
            ("identity", _) => ModuleChoice::Identity,
            (_, None) => ModuleChoice::Data,
            (_, Some(d)) => ModuleChoice::Denoiser(d),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_cli_over_file_over_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.cfg");
        std::fs::write(&file, "# comment\nlambda = 0.5\ntau=2 # trailing\nscheme = efima\n").unwrap();
        let cfg = ExperimentConfig::load(Some(&file), &["tau=3".into()]).unwrap();
        assert_eq!(cfg.lambda, 0.5);
        assert_eq!(cfg.tau, 3.0);
        assert_eq!(cfg.scheme, Scheme::Efima);
        assert_eq!(cfg.max_iters, 80);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.set("nope", "1").is_err());
        assert!(cfg.set("lambda", "x").is_err());
        assert!(cfg.apply_text("lambda 1").is_err());
        assert!(cfg.set("module", "cnn").is_ok());
        assert!(cfg.module_choice("cnn").is_err());
    }

    #[test]
    fn lists_and_optionals() {
        let mut cfg = ExperimentConfig::default();
        cfg.set("schemes", "pg, ifima").unwrap();
        assert_eq!(cfg.schemes, vec![Scheme::Pg, Scheme::Ifima]);
        cfg.set("schemes", "").unwrap();
        assert!(cfg.schemes.is_empty());
        cfg.set("gamma", "0.1").unwrap();
        assert_eq!(cfg.step_rules().step, StepRule::Fixed(Schedule::Constant(0.1)));
        cfg.set("gamma", "auto").unwrap();
        assert_eq!(cfg.gamma, None);
    }
}
