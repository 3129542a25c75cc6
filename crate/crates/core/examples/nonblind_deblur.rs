//! Non-blind deblurring of a synthetic image: PG against iFIMA with a TV
//! module.
//!
//! `cargo run --release --example nonblind_deblur`

use std::sync::Arc;

use fima::deconv::{make_synthetic, solve_nonblind, KernelKind, ModuleChoice, NonblindOptions};
use fima::metrics::{psnr, ssim};
use fima::modules::TvDenoiser;
use fima::solvers::ToleranceRule;
use fima::{PenaltyKind, Scheme};

fn main() -> fima::Result<()> {
    let inst = make_synthetic(1, 64, KernelKind::Gaussian { size: 9, sigma: 1.6 }, 0.01)?;
    let mut opts = NonblindOptions { penalty: PenaltyKind::L1, lambda: 1e-3, tau: 1.0, ..Default::default() };
    opts.solver = opts.solver.with_max_iters(1000);
    opts.solver.rules.tolerance = ToleranceRule::FractionOfMu(0.45);

    let tv = ModuleChoice::Denoiser(Arc::new(TvDenoiser::new(5e-4, 20)));
    println!("blurred: psnr {:.2} dB", psnr(&inst.y, &inst.z_true, 1.0)?);
    for (name, scheme, modules) in [
        ("pg", Scheme::Pg, ModuleChoice::Identity),
        ("apg", Scheme::Apg, ModuleChoice::Identity),
        ("efima+tv", Scheme::Efima, tv.clone()),
        ("ifima+tv", Scheme::Ifima, tv),
    ] {
        let out = solve_nonblind(&inst.y, &inst.b_true, scheme, &modules, &opts)?;
        println!(
            "{name:<9} iters {:>4}  accepts {:>4}  psnr {:.2} dB  ssim {:.4}  stop {:?}",
            out.trace.iterations(),
            out.trace.accept_count(),
            psnr(&out.image, &inst.z_true, 1.0)?,
            ssim(&out.image, &inst.z_true, 1.0)?,
            out.trace.stop,
        );
    }
    Ok(())
}
