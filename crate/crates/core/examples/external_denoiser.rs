//! Plugging an external program in as `A_g`. The program receives the
//! iterate as a 16-bit PGM in `{in}` and must write its result to `{out}`.
//! Here it is `cp`, so the module is the identity; a failing command makes
//! the solver fall back and log a warning.
//!
//! `cargo run --release --example external_denoiser`

use std::sync::Arc;

use fima::deconv::{make_synthetic, solve_nonblind, KernelKind, ModuleChoice, NonblindOptions};
use fima::modules::ExternalDenoiser;
use fima::solvers::SolverConfig;
use fima::Scheme;

fn main() -> fima::Result<()> {
    let inst = make_synthetic(5, 32, KernelKind::Gaussian { size: 5, sigma: 1.0 }, 0.01)?;
    let opts = NonblindOptions { solver: SolverConfig::default().with_max_iters(5), ..Default::default() };
    for template in ["cp {in} {out}", "exit 1 # {in} {out}"] {
        let module = ModuleChoice::Denoiser(Arc::new(ExternalDenoiser::new(template)?));
        let out = solve_nonblind(&inst.y, &inst.b_true, Scheme::Efima, &module, &opts)?;
        println!("`{template}`: {} iterations, {} accepted", out.trace.iterations(), out.trace.accept_count());
        let first = out.trace.warnings().next().map(str::to_owned);
        if let Some(w) = first {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
