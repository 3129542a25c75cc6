//! Module ablation: every `A_g` against a grid of data-module weights,
//! written as plot-ready CSV on stdout.
//!
//! `cargo run --release --example module_ablation > ablation.csv`

use std::sync::Arc;

use fima::deconv::{make_synthetic, solve_nonblind, KernelKind, ModuleChoice, NonblindOptions};
use fima::metrics::psnr;
use fima::modules::{RecursiveFilter, TvDenoiser};
use fima::Scheme;

fn main() -> fima::Result<()> {
    let inst = make_synthetic(2, 64, KernelKind::Gaussian { size: 9, sigma: 1.6 }, 0.01)?;
    let modules = [
        ("af", ModuleChoice::Data),
        ("tv", ModuleChoice::Denoiser(Arc::new(TvDenoiser::new(0.01, 20)))),
        ("rf", ModuleChoice::Denoiser(Arc::new(RecursiveFilter::new(0.5)))),
    ];
    println!("scheme,module,tau,iterations,accepts,psnr");
    for tau in [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0] {
        let opts = NonblindOptions { tau, ..Default::default() };
        for scheme in [Scheme::Efima, Scheme::Ifima] {
            for (name, m) in &modules {
                let out = solve_nonblind(&inst.y, &inst.b_true, scheme, m, &opts)?;
                println!(
                    "{},{name},{tau:e},{},{},{:.4}",
                    scheme.name(),
                    out.trace.iterations(),
                    out.trace.accept_count(),
                    psnr(&out.image, &inst.z_true, 1.0)?
                );
            }
        }
    }
    Ok(())
}
