use std::time::Instant;

use ndarray::Array1;

use super::{check_start, dist_sq, elapsed_ms, propose, step_errors, SolverConfig};
use crate::error::Result;
use crate::metrics::stopping;
use crate::modules::ModulePair;
use crate::problem::{certificate_from_gradients, CompositeProblem};
use crate::trace::{Diagnostics, IterateTrace, Policy, TraceRow};

/// Error-controlled (implicit momentum) iteration.
///
/// The module output `u` is corrected by one prox step on the penalized
/// objective `Psi + mu/2 |. - x^k|^2`,
/// `u~ = prox_{gamma g}(u - gamma (grad f(u) + mu (u - x^k)))`,
/// and `u~` becomes the monitor when its certificate
/// `d = (mu - 1/gamma)(u~ - u) - (grad f(u) - grad f(u~))` satisfies
/// `|d| <= C |u~ - x^k|`.
pub fn solve_ifima(
    problem: &CompositeProblem,
    modules: &ModulePair,
    x0: &Array1<f64>,
    cfg: &SolverConfig,
) -> Result<(Array1<f64>, IterateTrace)> {
    check_start(x0)?;
    let lip = problem.lipschitz();
    cfg.validate(lip, true)?;

    let mut x = x0.clone();
    let mut obj_x = problem.objective(&x);
    let mut trace = IterateTrace::default();
    for k in 0..cfg.max_iters {
        let start = Instant::now();
        let (gamma, mu, c) = cfg.rules.check(k, lip, true)?;
        let (proposal, warning) = propose(modules, &x, k)?;

        let mut diag = Diagnostics { gamma, lipschitz: lip, mu: Some(mu), c: Some(c), warning, ..Default::default() };
        let mut monitor = None;
        if let Some(u) = proposal {
            let grad_u = problem.smooth.gradient(&u);
            let pulled = &grad_u + &((&u - &x) * mu);
            let u_tilde = problem.nonsmooth.prox(&(&u - &(pulled * gamma)), gamma)?;
            let grad_ut = problem.smooth.gradient(&u_tilde);
            let cert = certificate_from_gradients(&grad_u, &grad_ut, &u, &u_tilde, &x, mu, gamma, c)?;
            let obj_ut = problem.objective(&u_tilde);
            diag.candidate_objective = Some(obj_ut);
            diag.candidate_dist_sq = Some(dist_sq(&u_tilde, &x));
            diag.norm_d = Some(cert.norm_d);
            diag.rhs = Some(cert.rhs);
            if cert.accepted {
                monitor = Some((u_tilde, obj_ut));
            }
        }
        let (v, obj_v, policy) = match monitor {
            Some((ut, obj)) => (ut, obj, Policy::Accept),
            None => (x.clone(), obj_x, Policy::Fallback),
        };

        let next = problem.prox_gradient_step(&v, gamma)?;
        let obj_next = problem.objective(&next);
        let (iter_error, recon_error) = step_errors(&next, &x);
        diag.monitor_objective = obj_v;
        diag.next_objective = obj_next;
        diag.refine_step_sq = dist_sq(&next, &v);
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

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use ndarray::{array, Array2};

    use super::*;
    use crate::error::FimaError;
    use crate::modules::{module_identity, FnModule, Identity};
    use crate::problem::{LeastSquares, MatrixOperator};
    use crate::prox::{prox_l1, ScalarPenalty};
    use crate::solvers::{solve_baseline, BaselineVariant};
    use crate::trace::Policy;

    fn denoise_l1(y: Array1<f64>, lambda: f64) -> CompositeProblem {
        let n = y.len();
        let ls = LeastSquares::new(Arc::new(MatrixOperator(Array2::eye(n))), y).unwrap();
        CompositeProblem::with_lipschitz(Arc::new(ls), Arc::new(ScalarPenalty::l1(lambda)), 2.0).unwrap()
    }

    fn cfg(iters: usize) -> SolverConfig {
        SolverConfig::default().with_max_iters(iters).with_tol(0.0).with_gamma(0.4).with_mu(2.5).with_c(0.6)
    }

    #[test]
    fn identity_is_rejected_and_matches_pg() {
        let p = denoise_l1(array![3.0, -0.2, 1.0], 0.5);
        let x0 = array![0.5, 0.5, -1.0];
        let (xi, ti) = solve_ifima(&p, &module_identity(), &x0, &cfg(12)).unwrap();
        let (xp, _) = solve_baseline(&p, &x0, &cfg(12), &BaselineVariant::Pg).unwrap();
        assert_eq!(xi, xp);
        assert_eq!(ti.accept_count(), 0);
    }

    #[test]
    fn exact_proximal_point_is_accepted() {
        let (y, lambda, mu) = (array![3.0, -2.0, 0.1], 1.0, 2.5);
        let p = denoise_l1(y.clone(), lambda);
        let prox_point = FnModule::new("prox-point", move |x: &Array1<f64>| {
            let centre = (&y * 2.0 + x * mu) / (2.0 + mu);
            prox_l1(&centre, lambda / (2.0 + mu)).map_err(|e| crate::modules::ModuleFault::Fatal(e.to_string()))
        });
        let modules = ModulePair::new(Arc::new(prox_point), Arc::new(Identity));
        let x0 = array![0.0, 0.0, 0.0];
        let (_, t) = solve_ifima(&p, &modules, &x0, &cfg(6)).unwrap();
        for r in &t.records {
            assert_eq!(r.row.policy, Policy::Accept);
            assert!(r.diag.norm_d.unwrap() <= r.diag.rhs.unwrap());
            assert!(r.diag.next_objective <= r.diag.monitor_objective);
        }
        let (_, pg) = solve_baseline(&p, &x0, &cfg(6), &BaselineVariant::Pg).unwrap();
        assert!(t.records[1].row.objective < pg.records[1].row.objective);
    }

    #[test]
    fn tolerance_bound_enforced() {
        let p = denoise_l1(array![1.0], 0.1);
        let bad = cfg(3).with_c(1.25);
        assert!(matches!(solve_ifima(&p, &module_identity(), &array![0.0], &bad), Err(FimaError::InvalidConfig(_))));
    }
}
