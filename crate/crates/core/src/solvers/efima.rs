use std::time::Instant;

use ndarray::Array1;

use super::{check_start, dist_sq, elapsed_ms, propose, step_errors, SolverConfig};
use crate::error::Result;
use crate::metrics::stopping;
use crate::modules::ModulePair;
use crate::problem::CompositeProblem;
use crate::trace::{Diagnostics, IterateTrace, Policy, TraceRow};

/// Explicit-momentum iteration.
///
/// Each step proposes `u = A_g(A_f(x))`, keeps it as the monitor when it
/// does not increase `Psi` (ties accept), and refines the monitor with one
/// proximal gradient step.
pub fn solve_efima(
    problem: &CompositeProblem,
    modules: &ModulePair,
    x0: &Array1<f64>,
    cfg: &SolverConfig,
) -> Result<(Array1<f64>, IterateTrace)> {
    check_start(x0)?;
    let lip = problem.lipschitz();
    cfg.validate(lip, false)?;

    let mut x = x0.clone();
    let mut obj_x = problem.objective(&x);
    let mut trace = IterateTrace::default();
    for k in 0..cfg.max_iters {
        let start = Instant::now();
        let (gamma, _, _) = cfg.rules.check(k, lip, false)?;
        let (proposal, warning) = propose(modules, &x, k)?;

        let mut candidate_objective = None;
        let (v, obj_v, policy) = match proposal {
            Some(u) => {
                let obj_u = problem.objective(&u);
                candidate_objective = Some(obj_u);
                // an infeasible u has Psi = inf and falls back here
                if obj_u <= obj_x {
                    (u, obj_u, Policy::Accept)
                } else {
                    (x.clone(), obj_x, Policy::Fallback)
                }
            }
            None => (x.clone(), obj_x, Policy::Fallback),
        };

        let next = problem.prox_gradient_step(&v, gamma)?;
        let obj_next = problem.objective(&next);
        let (iter_error, recon_error) = step_errors(&next, &x);
        let diag = Diagnostics {
            gamma,
            lipschitz: lip,
            monitor_objective: obj_v,
            next_objective: obj_next,
            refine_step_sq: dist_sq(&next, &v),
            candidate_objective,
            warning,
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
        x = next;
        obj_x = obj_next;
        if let Some(reason) = stopping(iter_error, k + 1, cfg) {
            trace.stop = Some(reason);
            break;
        }
    }
    Ok((x, trace))
}
