use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{dist_sq, elapsed_ms, step_errors, StepRules};
use crate::error::{FimaError, Result};
use crate::modules::ModuleFault;
use crate::problem::{certificate_from_gradients, NonsmoothTerm};
use crate::trace::{Diagnostics, IterateTrace, Policy, StopReason, TraceRow};

/// Smooth coupling term `f(x_1, ..., x_N)`.
pub trait BlockSmooth: Send + Sync {
    fn value(&self, blocks: &[Array1<f64>]) -> f64;
    /// Gradient with respect to block `n`.
    fn partial_gradient(&self, blocks: &[Array1<f64>], n: usize) -> Array1<f64>;
    /// Lipschitz constant of `partial_gradient(., n)` with the other blocks
    /// held at their values in `blocks`.
    fn block_lipschitz(&self, blocks: &[Array1<f64>], n: usize) -> f64;
}

/// `f(X) + sum_n g_n(x_n)`.
#[derive(Clone)]
pub struct BlockProblem {
    pub smooth: Arc<dyn BlockSmooth>,
    pub nonsmooth: Vec<Arc<dyn NonsmoothTerm>>,
}

impl BlockProblem {
    pub fn new(smooth: Arc<dyn BlockSmooth>, nonsmooth: Vec<Arc<dyn NonsmoothTerm>>) -> Self {
        Self { smooth, nonsmooth }
    }

    pub fn num_blocks(&self) -> usize {
        self.nonsmooth.len()
    }

    pub fn objective(&self, blocks: &[Array1<f64>]) -> f64 {
        let mut g = 0.0;
        for (term, x) in self.nonsmooth.iter().zip(blocks) {
            let v = term.value(x);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            g += v;
        }
        self.smooth.value(blocks) + g
    }
}

/// `A_f`: maps the whole block tuple to an updated tuple.
pub trait JointModule: Send + Sync {
    fn label(&self) -> String;
    fn apply(&self, blocks: &[Array1<f64>]) -> std::result::Result<Vec<Array1<f64>>, ModuleFault>;
}

/// `A_{g_n}`: consumes the tuple produced by `A_f` and returns block `n`.
pub trait BlockModule: Send + Sync {
    fn label(&self) -> String;
    fn apply(&self, joint: &[Array1<f64>], n: usize) -> std::result::Result<Array1<f64>, ModuleFault>;
}

#[derive(Clone)]
pub struct BlockModules {
    pub a_f: Arc<dyn JointModule>,
    pub a_g: Vec<Arc<dyn BlockModule>>,
}

impl fmt::Debug for BlockModules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlockModules")
            .field("a_f", &self.a_f.label())
            .field("a_g", &self.a_g.iter().map(|m| m.label()).collect::<Vec<_>>())
            .finish()
    }
}

/// Identity `A_f` and per-block passthrough `A_{g_n}`.
pub struct PassThrough;

impl JointModule for PassThrough {
    fn label(&self) -> String {
        "identity".into()
    }
    fn apply(&self, blocks: &[Array1<f64>]) -> std::result::Result<Vec<Array1<f64>>, ModuleFault> {
        Ok(blocks.to_vec())
    }
}

impl BlockModule for PassThrough {
    fn label(&self) -> String {
        "identity".into()
    }
    fn apply(&self, joint: &[Array1<f64>], n: usize) -> std::result::Result<Array1<f64>, ModuleFault> {
        Ok(joint[n].clone())
    }
}

impl BlockModules {
    pub fn identity(num_blocks: usize) -> Self {
        let pass = Arc::new(PassThrough);
        Self { a_f: pass.clone(), a_g: (0..num_blocks).map(|_| pass.clone() as Arc<dyn BlockModule>).collect() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    pub blocks: Vec<Array1<f64>>,
}

impl BlockState {
    pub fn new(blocks: Vec<Array1<f64>>) -> Self {
        Self { blocks }
    }

    fn flat_norm_sq(&self) -> f64 {
        self.blocks.iter().map(|b| b.dot(b)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfimaConfig {
    pub max_iters: usize,
    pub iter_error_tol: f64,
    /// One entry per block.
    pub blocks: Vec<StepRules>,
}

impl MfimaConfig {
    pub fn uniform(num_blocks: usize, max_iters: usize, iter_error_tol: f64) -> Self {
        Self { max_iters, iter_error_tol, blocks: vec![StepRules::default(); num_blocks] }
    }
}

fn with_block(blocks: &[Array1<f64>], n: usize, value: Array1<f64>) -> Vec<Array1<f64>> {
    let mut out = blocks.to_vec();
    out[n] = value;
    out
}

fn proposal(
    modules: &BlockModules,
    blocks: &[Array1<f64>],
    n: usize,
    k: usize,
) -> Result<(Option<Array1<f64>>, Option<String>)> {
    let fail = |label: String, fault: ModuleFault| -> Result<(Option<Array1<f64>>, Option<String>)> {
        match fault {
            ModuleFault::Recoverable(reason) => {
                Ok((None, Some(format!("module `{label}` failed at iteration {k}, block {n}: {reason}; fell back"))))
            }
            ModuleFault::Fatal(reason) => Err(FimaError::ModuleFailure { module: label, iteration: k, reason }),
        }
    };
    let joint = match modules.a_f.apply(blocks) {
        Ok(j) => j,
        Err(f) => return fail(modules.a_f.label(), f),
    };
    if joint.len() != blocks.len() || joint.iter().zip(blocks).any(|(a, b)| a.len() != b.len()) {
        return fail(modules.a_f.label(), ModuleFault::Fatal("joint output has the wrong block layout".into()));
    }
    if joint.iter().any(|b| b.iter().any(|v| !v.is_finite())) {
        return fail(modules.a_f.label(), ModuleFault::Fatal("non-finite output".into()));
    }
    let a_g = &modules.a_g[n];
    let u = match a_g.apply(&joint, n) {
        Ok(u) => u,
        Err(f) => return fail(a_g.label(), f),
    };
    if u.len() != blocks[n].len() {
        return fail(
            a_g.label(),
            ModuleFault::Fatal(format!("block {n} output has dimension {} instead of {}", u.len(), blocks[n].len())),
        );
    }
    if u.iter().any(|v| !v.is_finite()) {
        return fail(a_g.label(), ModuleFault::Fatal("non-finite output".into()));
    }
    Ok((Some(u), None))
}

/// Observer called after every block update with the current tuple.
pub type SweepObserver<'a> = &'a mut dyn FnMut(usize, usize, &[Array1<f64>]);

/// Multi-block error-controlled iteration.
///
/// Blocks are visited in index order each sweep and every block update
/// sees the newest values of the blocks before it. Each block runs the
/// error-control pattern of [`super::solve_ifima`] with its own
/// `gamma_n = rule(L_n)`, where `L_n` is re-evaluated from the current
/// tuple. The trace has one row per (sweep, block).
pub fn solve_mfima(
    problem: &BlockProblem,
    modules: &BlockModules,
    state0: &BlockState,
    cfg: &MfimaConfig,
) -> Result<(BlockState, IterateTrace)> {
    solve_mfima_observed(problem, modules, state0, cfg, &mut |_, _, _| {})
}

pub fn solve_mfima_observed(
    problem: &BlockProblem,
    modules: &BlockModules,
    state0: &BlockState,
    cfg: &MfimaConfig,
    observer: SweepObserver<'_>,
) -> Result<(BlockState, IterateTrace)> {
    let n_blocks = problem.num_blocks();
    if n_blocks < 2 {
        return Err(FimaError::InvalidArgument(format!("multi-block solve needs N >= 2 blocks, got {n_blocks}")));
    }
    if state0.blocks.len() != n_blocks {
        return Err(FimaError::DimensionMismatch { expected: n_blocks, got: state0.blocks.len() });
    }
    if modules.a_g.len() != n_blocks {
        return Err(FimaError::DimensionMismatch { expected: n_blocks, got: modules.a_g.len() });
    }
    if cfg.blocks.len() != n_blocks {
        return Err(FimaError::DimensionMismatch { expected: n_blocks, got: cfg.blocks.len() });
    }
    if cfg.max_iters == 0 {
        return Err(FimaError::InvalidConfig("max_iters must be positive".into()));
    }
    if state0.blocks.iter().any(|b| b.is_empty() || b.iter().any(|v| !v.is_finite())) {
        return Err(FimaError::InvalidArgument("blocks must be non-empty and finite".into()));
    }

    let mut state = state0.clone();
    let mut trace = IterateTrace::default();
    for k in 0..cfg.max_iters {
        let sweep_start = state.clone();
        for n in 0..n_blocks {
            let start = Instant::now();
            let blocks = &state.blocks;
            let xn = &blocks[n];
            let lip = problem.smooth.block_lipschitz(blocks, n);
            let (gamma, mu, c) = cfg.blocks[n].check(k, lip, true).map_err(|e| match e {
                FimaError::InvalidConfig(m) => FimaError::InvalidConfig(format!("block {n}: {m}")),
                other => other,
            })?;
            let g_n = &problem.nonsmooth[n];
            let obj_x = problem.objective(blocks);
            let (u, warning) = proposal(modules, blocks, n, k)?;

            let mut diag =
                Diagnostics { gamma, lipschitz: lip, mu: Some(mu), c: Some(c), warning, ..Default::default() };
            let mut monitor = None;
            if let Some(u) = u {
                let at_u = with_block(blocks, n, u.clone());
                let grad_u = problem.smooth.partial_gradient(&at_u, n);
                let pulled = &grad_u + &((&u - xn) * mu);
                let u_tilde = g_n.prox(&(&u - &(pulled * gamma)), gamma)?;
                let at_ut = with_block(blocks, n, u_tilde.clone());
                let grad_ut = problem.smooth.partial_gradient(&at_ut, n);
                let cert = certificate_from_gradients(&grad_u, &grad_ut, &u, &u_tilde, xn, mu, gamma, c)?;
                let obj_ut = problem.objective(&at_ut);
                diag.candidate_objective = Some(obj_ut);
                diag.candidate_dist_sq = Some(dist_sq(&u_tilde, xn));
                diag.norm_d = Some(cert.norm_d);
                diag.rhs = Some(cert.rhs);
                if cert.accepted {
                    monitor = Some((at_ut, obj_ut));
                }
            }
            let (at_v, obj_v, policy) = match monitor {
                Some((at, obj)) => (at, obj, Policy::Accept),
                None => (blocks.clone(), obj_x, Policy::Fallback),
            };
            let v = at_v[n].clone();
            let grad_v = problem.smooth.partial_gradient(&at_v, n);
            let next = g_n.prox(&(&v - &(grad_v * gamma)), gamma)?;
            let (iter_error, recon_error) = step_errors(&next, xn);
            let refine = dist_sq(&next, &v);
            let mut new_blocks = at_v;
            new_blocks[n] = next;
            let obj_next = problem.objective(&new_blocks);
            diag.monitor_objective = obj_v;
            diag.next_objective = obj_next;
            diag.refine_step_sq = refine;
            trace.push(
                TraceRow {
                    k,
                    objective: obj_x,
                    iter_error,
                    recon_error,
                    policy,
                    block: Some(n),
                    wall_ms: Some(elapsed_ms(start)),
                },
                diag,
            );
            state.blocks = new_blocks;
            observer(k, n, &state.blocks);
        }

        let num: f64 = state.blocks.iter().zip(&sweep_start.blocks).map(|(a, b)| dist_sq(a, b)).sum();
        let den = sweep_start.flat_norm_sq();
        let sweep_error = if den == 0.0 { num.sqrt() } else { (num / den).sqrt() };
        if sweep_error <= cfg.iter_error_tol {
            trace.stop = Some(StopReason::Tolerance);
            break;
        }
        if k + 1 >= cfg.max_iters {
            trace.stop = Some(StopReason::MaxIters);
        }
    }
    Ok((state, trace))
}
