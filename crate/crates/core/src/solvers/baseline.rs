use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array1;

use super::{check_start, dist_sq, elapsed_ms, step_errors, SolverConfig};
use crate::error::{FimaError, Result};
use crate::metrics::stopping;
use crate::problem::CompositeProblem;
use crate::trace::{Diagnostics, IterateTrace, Policy, TraceRow};

/// Errors injected into the inexact variant at iteration `k`.
#[derive(Debug, Clone, Default)]
pub struct Perturbation {
    /// Added to `grad f(v^k)` before the forward step.
    pub gradient: Option<Array1<f64>>,
    /// Added to the prox output.
    pub prox: Option<Array1<f64>>,
}

/// `(k, dim) -> perturbation`; supplied by the caller so the solver stays
/// deterministic.
pub type PerturbationFn = Arc<dyn Fn(usize, usize) -> Perturbation + Send + Sync>;

#[derive(Clone)]
pub enum BaselineVariant {
    /// Plain proximal gradient.
    Pg,
    /// FISTA momentum.
    Apg,
    /// FISTA momentum, rejecting extrapolated points that increase `Psi`.
    MonotoneApg,
    /// Proximal gradient (or APG when `cfg.nesterov`) with injected errors.
    Inexact(PerturbationFn),
}

impl fmt::Debug for BaselineVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineVariant::Pg => write!(f, "Pg"),
            BaselineVariant::Apg => write!(f, "Apg"),
            BaselineVariant::MonotoneApg => write!(f, "MonotoneApg"),
            BaselineVariant::Inexact(_) => write!(f, "Inexact(..)"),
        }
    }
}

/// Classical first-order schemes on the same problem and trace format.
///
/// The policy column reads `accept` when the analytic (or momentum) point
/// was used as the monitor and `fallback` when the monotone variant
/// rejected the momentum point.
pub fn solve_baseline(
    problem: &CompositeProblem,
    x0: &Array1<f64>,
    cfg: &SolverConfig,
    variant: &BaselineVariant,
) -> Result<(Array1<f64>, IterateTrace)> {
    check_start(x0)?;
    let lip = problem.lipschitz();
    cfg.validate(lip, false)?;

    let momentum = match variant {
        BaselineVariant::Pg => false,
        BaselineVariant::Apg | BaselineVariant::MonotoneApg => true,
        BaselineVariant::Inexact(_) => cfg.nesterov,
    };

    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut t_prev = 1.0f64;
    let mut obj_x = problem.objective(&x);
    let mut trace = IterateTrace::default();
    for k in 0..cfg.max_iters {
        let start = Instant::now();
        let (gamma, _, _) = cfg.rules.check(k, lip, false)?;

        let (v, obj_v, policy) = if momentum {
            let t = (1.0 + (1.0 + 4.0 * t_prev * t_prev).sqrt()) / 2.0;
            let beta = (t_prev - 1.0) / t;
            t_prev = t;
            let y = &x + &((&x - &x_prev) * beta);
            let obj_y = problem.objective(&y);
            match variant {
                BaselineVariant::MonotoneApg if !(obj_y <= obj_x) => (x.clone(), obj_x, Policy::Fallback),
                _ => (y, obj_y, Policy::Accept),
            }
        } else {
            (x.clone(), obj_x, Policy::Accept)
        };

        let next = match variant {
            BaselineVariant::Inexact(perturb) => {
                let p = perturb(k, v.len());
                let mut grad = problem.smooth.gradient(&v);
                if let Some(e) = &p.gradient {
                    check_len(e, v.len())?;
                    grad += e;
                }
                let forward = &v - &(grad * gamma);
                let mut out = problem.nonsmooth.prox(&forward, gamma)?;
                if let Some(eps) = &p.prox {
                    check_len(eps, v.len())?;
                    out += eps;
                }
                out
            }
            _ => problem.prox_gradient_step(&v, gamma)?,
        };

        let obj_next = problem.objective(&next);
        let (iter_error, recon_error) = step_errors(&next, &x);
        let diag = Diagnostics {
            gamma,
            lipschitz: lip,
            monitor_objective: obj_v,
            next_objective: obj_next,
            refine_step_sq: dist_sq(&next, &v),
            ..Default::default()
        };
        let row = TraceRow {
            k,
            objective: obj_x,
            iter_error,
            recon_error,
            policy,
            block: None,
            wall_ms: Some(elapsed_ms(start)),
        };
        trace.push(row, diag);
        x_prev = std::mem::replace(&mut x, next);
        obj_x = obj_next;
        if let Some(reason) = stopping(iter_error, k + 1, cfg) {
            trace.stop = Some(reason);
            break;
        }
    }
    Ok((x, trace))
}

fn check_len(v: &Array1<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(FimaError::DimensionMismatch { expected: n, got: v.len() });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};

    use super::*;
    use crate::problem::{LeastSquares, MatrixOperator};
    use crate::prox::ScalarPenalty;

    fn problem(a: Array2<f64>, y: Array1<f64>, lambda: f64) -> CompositeProblem {
        let probe = Array1::zeros(a.ncols());
        let ls = LeastSquares::new(Arc::new(MatrixOperator(a)), y).unwrap();
        CompositeProblem::new(Arc::new(ls), Arc::new(ScalarPenalty::l1(lambda)), &probe).unwrap()
    }

    fn ill_conditioned() -> CompositeProblem {
        let a = Array2::from_diag(&array![1.0, 0.3, 0.1, 0.03]);
        problem(a, array![1.0, 1.0, 1.0, 1.0], 1e-3)
    }

    #[test]
    fn pg_reaches_soft_threshold() {
        let p = problem(Array2::eye(3), array![2.0, -0.1, -1.0], 0.4);
        let cfg = SolverConfig::default().with_max_iters(500).with_tol(1e-14);
        let (x, t) = solve_baseline(&p, &Array1::zeros(3), &cfg, &BaselineVariant::Pg).unwrap();
        assert!((&x - &array![1.8, 0.0, -0.8]).iter().all(|v| v.abs() < 1e-10), "{x}");
        assert_eq!(t.stop, Some(crate::trace::StopReason::Tolerance));
    }

    #[test]
    fn apg_beats_pg_on_ill_conditioned() {
        let p = ill_conditioned();
        let cfg = SolverConfig::default().with_max_iters(200).with_tol(0.0);
        let x0 = Array1::zeros(4);
        let (xp, _) = solve_baseline(&p, &x0, &cfg, &BaselineVariant::Pg).unwrap();
        let (xa, _) = solve_baseline(&p, &x0, &cfg, &BaselineVariant::Apg).unwrap();
        assert!(p.objective(&xa) < p.objective(&xp));
    }

    #[test]
    fn monotone_apg_never_increases() {
        let p = ill_conditioned();
        let cfg = SolverConfig::default().with_max_iters(150).with_tol(0.0);
        let (_, t) = solve_baseline(&p, &Array1::zeros(4), &cfg, &BaselineVariant::MonotoneApg).unwrap();
        let obj = t.objectives();
        assert!(obj.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn zero_perturbation_is_pg() {
        let p = ill_conditioned();
        let cfg = SolverConfig::default().with_max_iters(30).with_tol(0.0);
        let none: PerturbationFn = Arc::new(|_, _| Perturbation::default());
        let (xi, _) = solve_baseline(&p, &Array1::zeros(4), &cfg, &BaselineVariant::Inexact(none)).unwrap();
        let (xp, _) = solve_baseline(&p, &Array1::zeros(4), &cfg, &BaselineVariant::Pg).unwrap();
        assert_eq!(xi, xp);

        let shift: PerturbationFn = Arc::new(|_, n| Perturbation { prox: Some(Array1::from_elem(n, 1e-3)), gradient: None });
        let (xs, _) = solve_baseline(&p, &Array1::zeros(4), &cfg, &BaselineVariant::Inexact(shift)).unwrap();
        assert_ne!(xs, xp);
    }
}
