//! Every uni-block scheme on a small l1-regularized least-squares problem.
//!
//! The module pair is one explicit prox-gradient step, so eFIMA takes two
//! steps per iteration; with the identity pair it reproduces PG exactly.
//!
//! `cargo run --example solver_schemes`

use std::sync::Arc;

use fima::modules::{module_identity, module_pg_step};
use fima::problem::{LeastSquares, MatrixOperator};
use fima::rng::CounterRng;
use fima::solvers::{solve_baseline, solve_efima, solve_ifima, BaselineVariant};
use fima::{CompositeProblem, ScalarPenalty, SolverConfig};
use ndarray::{Array1, Array2};

fn main() -> fima::Result<()> {
    let mut rng = CounterRng::new(7);
    let a = Array2::from_shape_fn((40, 20), |_| rng.normal() / 40f64.sqrt());
    let y = Array1::from(rng.normal_vec(40));
    let smooth = LeastSquares::new(Arc::new(MatrixOperator(a)), y)?;
    let x0 = Array1::zeros(20);
    let problem = CompositeProblem::new(Arc::new(smooth), Arc::new(ScalarPenalty::l1(0.05)), &x0)?;
    let cfg = SolverConfig::default().with_max_iters(500).with_tol(1e-10);
    let gamma = 0.99 / problem.lipschitz();

    let runs = [
        ("pg", solve_baseline(&problem, &x0, &cfg, &BaselineVariant::Pg)?),
        ("apg", solve_baseline(&problem, &x0, &cfg, &BaselineVariant::Apg)?),
        ("efima/identity", solve_efima(&problem, &module_identity(), &x0, &cfg)?),
        ("efima/pg-step", solve_efima(&problem, &module_pg_step(&problem, gamma), &x0, &cfg)?),
        ("ifima/pg-step", solve_ifima(&problem, &module_pg_step(&problem, gamma), &x0, &cfg)?),
    ];
    println!("{:<16} {:>6} {:>8} {:>22}", "scheme", "iters", "accepts", "objective");
    for (name, (x, trace)) in &runs {
        println!("{name:<16} {:>6} {:>8} {:>22.15e}", trace.iterations(), trace.accept_count(), problem.objective(x));
    }
    let same = runs[0].1 .1.objectives() == runs[2].1 .1.objectives();
    println!("efima/identity trajectory equals pg: {same}");
    Ok(())
}
