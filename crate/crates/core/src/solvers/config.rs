use serde::{Deserialize, Serialize};

use crate::error::{FimaError, Result};

/// A per-iteration sequence; the last entry repeats once it runs out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Schedule {
    Constant(f64),
    PerIteration(Vec<f64>),
}

impl Schedule {
    pub fn at(&self, k: usize) -> f64 {
        match self {
            Schedule::Constant(v) => *v,
            Schedule::PerIteration(vs) => vs.get(k).or_else(|| vs.last()).copied().unwrap_or(f64::NAN),
        }
    }
}

/// How `gamma^k` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StepRule {
    Fixed(Schedule),
    /// `gamma = factor / L`, with `factor < 1`.
    InverseLipschitz(f64),
}

/// How the proximal penalty `mu^k` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PenaltyRule {
    Fixed(Schedule),
    /// `mu = factor / gamma`.
    TimesInverseStep(f64),
}

/// How the error tolerance `C^k` is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ToleranceRule {
    Fixed(Schedule),
    /// `C = fraction * mu`, with `fraction < 1/2`.
    FractionOfMu(f64),
}

/// Per-block parameter rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRules {
    pub step: StepRule,
    pub mu: PenaltyRule,
    pub tolerance: ToleranceRule,
}

impl Default for StepRules {
    fn default() -> Self {
        Self {
            step: StepRule::InverseLipschitz(0.99),
            mu: PenaltyRule::TimesInverseStep(1.0),
            tolerance: ToleranceRule::FractionOfMu(0.25),
        }
    }
}

impl StepRules {
    pub fn gamma(&self, k: usize, lipschitz: f64) -> f64 {
        match &self.step {
            StepRule::Fixed(s) => s.at(k),
            StepRule::InverseLipschitz(factor) => {
                if lipschitz > 0.0 {
                    factor / lipschitz
                } else {
                    // f is affine-free (L = 0): any step works
                    *factor
                }
            }
        }
    }

    pub fn mu(&self, k: usize, gamma: f64) -> f64 {
        match &self.mu {
            PenaltyRule::Fixed(s) => s.at(k),
            PenaltyRule::TimesInverseStep(f) => f / gamma,
        }
    }

    pub fn tolerance(&self, k: usize, mu: f64) -> f64 {
        match &self.tolerance {
            ToleranceRule::Fixed(s) => s.at(k),
            ToleranceRule::FractionOfMu(f) => f * mu,
        }
    }

    /// Checks `0 < gamma L < 1` and, when `with_error_control`, `0 < 2C < mu`.
    pub fn check(&self, k: usize, lipschitz: f64, with_error_control: bool) -> Result<(f64, f64, f64)> {
        let gamma = self.gamma(k, lipschitz);
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(FimaError::InvalidConfig(format!("gamma^{k} = {gamma} must be positive")));
        }
        if !(gamma * lipschitz < 1.0) {
            return Err(FimaError::InvalidConfig(format!(
                "gamma^{k} = {gamma} violates gamma < 1/L with L = {lipschitz}"
            )));
        }
        if !with_error_control {
            return Ok((gamma, f64::NAN, f64::NAN));
        }
        let mu = self.mu(k, gamma);
        let c = self.tolerance(k, mu);
        if !(c > 0.0 && 2.0 * c < mu && mu.is_finite()) {
            return Err(FimaError::InvalidConfig(format!("need 0 < 2C < mu < inf at k = {k}, got C = {c}, mu = {mu}")));
        }
        Ok((gamma, mu, c))
    }
}

/// Parameters shared by every uni-block solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `|x^{k+1} - x^k| / |x^k|` drops to this value.
    pub iter_error_tol: f64,
    pub rules: StepRules,
    /// Baselines only: use momentum extrapolation in the inexact variant.
    pub nesterov: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { max_iters: 80, iter_error_tol: 1e-4, rules: StepRules::default(), nesterov: false }
    }
}

impl SolverConfig {
    pub fn with_max_iters(mut self, n: usize) -> Self {
        self.max_iters = n;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.iter_error_tol = tol;
        self
    }

    pub fn with_rules(mut self, rules: StepRules) -> Self {
        self.rules = rules;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.rules.step = StepRule::Fixed(Schedule::Constant(gamma));
        self
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.rules.mu = PenaltyRule::Fixed(Schedule::Constant(mu));
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.rules.tolerance = ToleranceRule::Fixed(Schedule::Constant(c));
        self
    }

    /// Validates every iteration's parameters against `L` before a run.
    pub fn validate(&self, lipschitz: f64, with_error_control: bool) -> Result<()> {
        if self.max_iters == 0 {
            return Err(FimaError::InvalidConfig("max_iters must be positive".into()));
        }
        if !(self.iter_error_tol >= 0.0) {
            return Err(FimaError::InvalidConfig("iter_error_tol must be nonnegative".into()));
        }
        for k in 0..self.max_iters {
            self.rules.check(k, lipschitz, with_error_control)?;
            if matches!(
                (&self.rules.step, &self.rules.mu, &self.rules.tolerance),
                (StepRule::InverseLipschitz(_), PenaltyRule::TimesInverseStep(_), ToleranceRule::FractionOfMu(_))
            ) {
                break;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_repeats_last() {
        let s = Schedule::PerIteration(vec![1.0, 2.0]);
        assert_eq!(s.at(0), 1.0);
        assert_eq!(s.at(5), 2.0);
    }

    #[test]
    fn validation() {
        let cfg = SolverConfig::default().with_gamma(0.5);
        assert!(cfg.validate(1.9, false).is_ok());
        assert!(cfg.validate(2.0, false).is_err());
        let cfg = SolverConfig::default().with_gamma(0.5).with_mu(1.0).with_c(0.5);
        assert!(cfg.validate(1.0, true).is_err());
        let cfg = cfg.with_c(0.49);
        assert!(cfg.validate(1.0, true).is_ok());
        assert!(SolverConfig::default().validate(2.0, true).is_ok());
    }
}
