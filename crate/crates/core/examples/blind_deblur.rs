//! Coarse-to-fine blind kernel estimation on a motion-blurred image, then
//! latent recovery with the estimated kernel.
//!
//! `cargo run --release --example blind_deblur`

use fima::deconv::{
    make_synthetic, solve_blind, solve_nonblind, BlindOptions, KernelField, KernelKind, ModuleChoice, NonblindOptions,
};
use fima::metrics::{kernel_similarity, psnr};
use fima::{PenaltyKind, Scheme, SolverConfig};

fn main() -> fima::Result<()> {
    let inst = make_synthetic(0, 64, KernelKind::Motion { size: 11 }, 0.005)?;
    let out = solve_blind(&inst.y, None, &BlindOptions::default())?;

    let ks = kernel_similarity(&out.kernel, &inst.b_true)?;
    let ks_uniform = kernel_similarity(&KernelField::uniform(11)?, &inst.b_true)?;
    println!("scales {:?}", out.levels.iter().map(|l| (l.height, l.kernel_size)).collect::<Vec<_>>());
    println!("KS estimate {ks:.4}  uniform {ks_uniform:.4}  simplex {}", out.kernel.is_on_simplex(1e-12));

    let shade = |v: f64| match (v * 40.0) as usize {
        0 => ' ',
        1 => '.',
        2..=3 => ':',
        _ => '#',
    };
    for (est, truth) in out.kernel.taps().rows().into_iter().zip(inst.b_true.taps().rows()) {
        let e: String = est.iter().map(|v| shade(*v)).collect();
        let t: String = truth.iter().map(|v| shade(*v)).collect();
        println!("  |{e}|   |{t}|");
    }

    let opts = NonblindOptions {
        penalty: PenaltyKind::L1,
        lambda: 1e-2,
        solver: SolverConfig::default().with_max_iters(100),
        ..Default::default()
    };
    let latent = solve_nonblind(&inst.y, &out.kernel, Scheme::Apg, &ModuleChoice::Identity, &opts)?;
    let known = solve_nonblind(&inst.y, &inst.b_true, Scheme::Apg, &ModuleChoice::Identity, &opts)?;
    println!(
        "psnr: blurred {:.2} dB, estimated kernel {:.2} dB, true kernel {:.2} dB",
        psnr(&inst.y, &inst.z_true, 1.0)?,
        psnr(&latent.image, &inst.z_true, 1.0)?,
        psnr(&known.image, &inst.z_true, 1.0)?
    );
    Ok(())
}
