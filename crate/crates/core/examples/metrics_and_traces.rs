//! Quality metrics and trace serialization.
//!
//! `cargo run --release --example metrics_and_traces`

use fima::deconv::{make_synthetic, solve_nonblind, KernelField, KernelKind, ModuleChoice};
use fima::metrics::{error_rate, kernel_similarity, psnr, ssim};
use fima::trace::{from_json_str, read_csv, to_csv_string, to_json_string};
use fima::Scheme;

fn main() -> fima::Result<()> {
    let inst = make_synthetic(4, 64, KernelKind::Motion { size: 11 }, 0.01)?;
    let opts = Default::default();
    let z_kt = solve_nonblind(&inst.y, &inst.b_true, Scheme::Pg, &ModuleChoice::Identity, &opts)?;
    let z_box = solve_nonblind(&inst.y, &KernelField::uniform(11)?, Scheme::Pg, &ModuleChoice::Identity, &opts)?;

    println!("psnr  blurred {:.2}  true-kernel {:.2}", psnr(&inst.y, &inst.z_true, 1.0)?, psnr(&z_kt.image, &inst.z_true, 1.0)?);
    println!("ssim  blurred {:.4}  true-kernel {:.4}", ssim(&inst.y, &inst.z_true, 1.0)?, ssim(&z_kt.image, &inst.z_true, 1.0)?);
    println!("KS    uniform kernel {:.4}", kernel_similarity(&KernelField::uniform(11)?, &inst.b_true)?);
    println!("ER    uniform kernel {:.3}", error_rate(&z_box.image, &inst.z_true, &z_kt.image)?);

    let rows = z_kt.trace.without_timing().rows();
    let csv = to_csv_string(&rows);
    println!("\n{}", csv.lines().take(4).collect::<Vec<_>>().join("\n"));
    assert_eq!(read_csv(csv.as_bytes())?, rows);
    assert_eq!(from_json_str(&to_json_string(&rows))?, rows);
    println!("... {} rows; CSV and JSON round-trip exactly", rows.len());
    Ok(())
}
