//! Image and kernel quality metrics and the stopping test.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::deconv::{ImageField, KernelField};
use crate::error::{FimaError, Result};
use crate::solvers::SolverConfig;
use crate::trace::StopReason;

pub const PSNR_CAP_DB: f64 = 99.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub kernel_similarity: Option<f64>,
    pub error_rate: Option<f64>,
}

fn same_dim(a: &Array2<f64>, b: &Array2<f64>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(FimaError::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// `10 log10(peak^2 / MSE)`, capped at 99 dB.
pub fn psnr(a: &ImageField, b: &ImageField, peak: f64) -> Result<f64> {
    same_dim(a.pixels(), b.pixels())?;
    if !(peak > 0.0) {
        return Err(FimaError::InvalidArgument(format!("peak must be positive, got {peak}")));
    }
    let mse = (a.pixels() - b.pixels()).mapv(|d| d * d).mean().unwrap_or(0.0);
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM over every 8x8 window, uniform weights,
/// `C1 = (0.01 peak)^2`, `C2 = (0.03 peak)^2`.
pub fn ssim(a: &ImageField, b: &ImageField, peak: f64) -> Result<f64> {
    let (x, y) = (a.pixels(), b.pixels());
    same_dim(x, y)?;
    let (h, w) = x.dim();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(FimaError::InvalidArgument(format!("SSIM needs at least 8x8 images, got {h}x{w}")));
    }
    let c1 = (SSIM_K1 * peak).powi(2);
    let c2 = (SSIM_K2 * peak).powi(2);
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..=h - SSIM_WINDOW {
        for j in 0..=w - SSIM_WINDOW {
            let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for di in 0..SSIM_WINDOW {
                for dj in 0..SSIM_WINDOW {
                    let (p, q) = (x[[i + di, j + dj]], y[[i + di, j + dj]]);
                    sx += p;
                    sy += q;
                    sxx += p * p;
                    syy += q * q;
                    sxy += p * q;
                }
            }
            let (mx, my) = (sx / n, sy / n);
            let vx = (sxx / n - mx * mx).max(0.0);
            let vy = (syy / n - my * my).max(0.0);
            let cxy = sxy / n - mx * my;
            total += ((2.0 * mx * my + c1) * (2.0 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(-1.0, 1.0))
}

/// Maximum normalized cross-correlation over all overlapping integer shifts.
pub fn kernel_similarity(b_est: &KernelField, b_true: &KernelField) -> Result<f64> {
    let (a, b) = (b_est.taps(), b_true.taps());
    let na = a.iter().map(|v| v * v).sum::<f64>();
    let nb = b.iter().map(|v| v * v).sum::<f64>();
    if na == 0.0 || nb == 0.0 {
        return Err(FimaError::InvalidArgument("kernel similarity of a zero kernel".into()));
    }
    if a == b {
        return Ok(1.0);
    }
    let (ah, aw) = (a.nrows() as isize, a.ncols() as isize);
    let (bh, bw) = (b.nrows() as isize, b.ncols() as isize);
    let mut best = f64::NEG_INFINITY;
    for di in -(bh - 1)..ah {
        for dj in -(bw - 1)..aw {
            let mut acc = 0.0;
            for i in 0.max(di)..ah.min(di + bh) {
                for j in 0.max(dj)..aw.min(dj + bw) {
                    acc += a[[i as usize, j as usize]] * b[[(i - di) as usize, (j - dj) as usize]];
                }
            }
            best = best.max(acc);
        }
    }
    Ok((best / (na * nb).sqrt()).clamp(0.0, 1.0))
}

/// `|z_est - z_true|^2 / |z_kt - z_true|^2` where `z_kt` is the
/// known-kernel reconstruction.
pub fn error_rate(z_est: &ImageField, z_true: &ImageField, z_kt: &ImageField) -> Result<f64> {
    same_dim(z_est.pixels(), z_true.pixels())?;
    same_dim(z_kt.pixels(), z_true.pixels())?;
    let num = (z_est.pixels() - z_true.pixels()).mapv(|d| d * d).sum();
    let den = (z_kt.pixels() - z_true.pixels()).mapv(|d| d * d).sum();
    if den == 0.0 {
        return Ok(if num == 0.0 { 1.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// [`error_rate`] with `z_kt = solve(y, kernel_true)`.
pub fn error_rate_with(
    z_est: &ImageField,
    z_true: &ImageField,
    y: &ImageField,
    kernel_true: &KernelField,
    solve: impl Fn(&ImageField, &KernelField) -> Result<ImageField>,
) -> Result<f64> {
    let z_kt = solve(y, kernel_true)?;
    error_rate(z_est, z_true, &z_kt)
}

/// Which stopping condition fired after `completed` iterations, if any.
pub fn stopping(iter_error: f64, completed: usize, cfg: &SolverConfig) -> Option<StopReason> {
    if iter_error <= cfg.iter_error_tol {
        Some(StopReason::Tolerance)
    } else if completed >= cfg.max_iters {
        Some(StopReason::MaxIters)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn img(a: Array2<f64>) -> ImageField {
        ImageField::new(a).unwrap()
    }

    #[test]
    fn psnr_examples() {
        let z = img(Array2::zeros((4, 4)));
        let h = img(Array2::from_elem((4, 4), 0.5));
        assert_eq!(psnr(&z, &z, 1.0).unwrap(), 99.0);
        // 10 log10(1 / 0.25)
        assert!((psnr(&z, &h, 1.0).unwrap() - 6.020599913279624).abs() < 1e-12);
        assert_eq!(psnr(&z, &h, 1.0).unwrap(), psnr(&h, &z, 1.0).unwrap());
        assert!(psnr(&z, &img(Array2::zeros((4, 5))), 1.0).is_err());
    }

    #[test]
    fn psnr_decreases_with_noise() {
        let mut rng = CounterRng::new(11);
        let clean = Array2::from_shape_fn((32, 32), |_| rng.uniform());
        let noise = Array2::from_shape_fn((32, 32), |_| rng.normal());
        let base = img(clean.clone());
        let scores: Vec<f64> = [0.01, 0.02, 0.04, 0.08, 0.16]
            .iter()
            .map(|s| psnr(&base, &img(&clean + &(&noise * *s)), 1.0).unwrap())
            .collect();
        assert!(scores.windows(2).all(|w| w[1] < w[0]), "{scores:?}");
    }

    #[test]
    fn ssim_examples() {
        let mut rng = CounterRng::new(2);
        let a = img(Array2::from_shape_fn((16, 16), |(i, j)| if (i / 2 + j / 2) % 2 == 0 { 0.9 } else { 0.1 } + 0.05 * rng.uniform()));
        let inv = img(a.pixels().mapv(|v| 1.0 - v));
        assert!((ssim(&a, &a, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(ssim(&a, &inv, 1.0).unwrap() < 0.5);
        assert_eq!(ssim(&a, &inv, 1.0).unwrap(), ssim(&inv, &a, 1.0).unwrap());
        assert!(ssim(&img(Array2::zeros((7, 9))), &img(Array2::zeros((7, 9))), 1.0).is_err());
    }

    #[test]
    fn kernel_similarity_examples() {
        let k = KernelField::motion_line(7, 5.0, 0.4).unwrap();
        assert_eq!(kernel_similarity(&k, &k).unwrap(), 1.0);
        let mut shifted = Array2::zeros((9, 9));
        shifted.slice_mut(ndarray::s![2.., ..7]).assign(k.taps());
        let shifted = KernelField::new(shifted).unwrap();
        assert!((kernel_similarity(&shifted, &k).unwrap() - 1.0).abs() < 1e-12);
        assert!(kernel_similarity(&KernelField::new(Array2::zeros((3, 3))).unwrap(), &k).is_err());
    }

    #[test]
    fn error_rate_examples() {
        let t = img(Array2::from_elem((4, 4), 0.5));
        let kt = img(Array2::from_elem((4, 4), 0.6));
        assert_eq!(error_rate(&kt, &t, &kt).unwrap(), 1.0);
        assert!(error_rate(&t, &t, &kt).unwrap() <= 1.0);
        let far = img(Array2::from_elem((4, 4), 0.8));
        assert!((error_rate(&far, &t, &kt).unwrap() - 9.0).abs() < 1e-9);
        assert_eq!(error_rate(&kt, &t, &t).unwrap(), f64::INFINITY);
    }

    #[test]
    fn stopping_rule() {
        let cfg = SolverConfig::default().with_max_iters(10).with_tol(1e-4);
        assert_eq!(stopping(5e-5, 1, &cfg), Some(StopReason::Tolerance));
        assert_eq!(stopping(2e-4, 3, &cfg), None);
        assert_eq!(stopping(2e-4, 10, &cfg), Some(StopReason::MaxIters));
    }
}
