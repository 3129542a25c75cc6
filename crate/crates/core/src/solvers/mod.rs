//! Convergence-guarded modular iterations and first-order baselines.
//!
//! All uni-block schemes share one refinement step,
//! `x^{k+1} = prox_{gamma g}(v^k - gamma grad f(v^k))`, and differ only in
//! how the monitor `v^k` is picked:
//!
//! * explicit momentum ([`solve_efima`]) keeps the module output `u^k` when
//!   `Psi(u^k) <= Psi(x^k)`;
//! * error control ([`solve_ifima`]) proximally corrects `u^k` and keeps the
//!   correction when its sub-gradient certificate is small enough;
//! * the block variant ([`solve_mfima`]) runs the error-control pattern on
//!   each block in Gauss-Seidel order.
//!
//! With `gamma < 1/L` every scheme satisfies
//! `Psi(x^{k+1}) <= Psi(v^k) - (1/(2 gamma) - L/2) |x^{k+1} - v^k|^2` and
//! `Psi(v^k) <= Psi(x^k)`, whatever the modules do.

mod baseline;
mod config;
mod efima;
mod ifima;
mod mfima;

use ndarray::Array1;

use crate::error::{FimaError, Result};
use crate::modules::{ModuleFault, ModulePair};

pub use baseline::{solve_baseline, BaselineVariant, Perturbation, PerturbationFn};
pub use config::{PenaltyRule, Schedule, SolverConfig, StepRule, StepRules, ToleranceRule};
pub use efima::solve_efima;
pub use ifima::solve_ifima;
pub use mfima::{
    solve_mfima, solve_mfima_observed, BlockModule, BlockModules, BlockProblem, BlockSmooth, BlockState, JointModule,
    MfimaConfig, PassThrough, SweepObserver,
};

/// Uni-block scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Pg,
    Apg,
    Efima,
    Ifima,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Pg => "pg",
            Scheme::Apg => "apg",
            Scheme::Efima => "efima",
            Scheme::Ifima => "ifima",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pg" => Ok(Scheme::Pg),
            "apg" => Ok(Scheme::Apg),
            "efima" => Ok(Scheme::Efima),
            "ifima" => Ok(Scheme::Ifima),
            other => Err(FimaError::Parse(format!("unknown scheme `{other}`"))),
        }
    }

    pub fn uses_modules(self) -> bool {
        matches!(self, Scheme::Efima | Scheme::Ifima)
    }
}

/// `|new - old| / |old|` and its square; absolute when `old = 0`.
pub(crate) fn step_errors(new: &Array1<f64>, old: &Array1<f64>) -> (f64, f64) {
    let diff = new - old;
    let num = diff.dot(&diff);
    let den = old.dot(old);
    if den == 0.0 {
        (num.sqrt(), num)
    } else {
        ((num / den).sqrt(), num / den)
    }
}

pub(crate) fn dist_sq(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    let d = a - b;
    d.dot(&d)
}

/// `Some(u)` on success, `None` plus a warning when a module failed softly.
pub(crate) fn propose(modules: &ModulePair, x: &Array1<f64>, k: usize) -> Result<(Option<Array1<f64>>, Option<String>)> {
    match modules.compose(x) {
        Ok(u) => Ok((Some(u), None)),
        Err((label, ModuleFault::Recoverable(reason))) => {
            Ok((None, Some(format!("module `{label}` failed at iteration {k}: {reason}; fell back"))))
        }
        Err((module, ModuleFault::Fatal(reason))) => Err(FimaError::ModuleFailure { module, iteration: k, reason }),
    }
}

pub(crate) fn check_start(x0: &Array1<f64>) -> Result<()> {
    if x0.is_empty() {
        return Err(FimaError::InvalidArgument("empty starting point".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(FimaError::InvalidArgument("starting point has non-finite entries".into()));
    }
    Ok(())
}

pub(crate) fn elapsed_ms(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}
