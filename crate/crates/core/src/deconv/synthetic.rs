//! Seeded synthetic deblurring instances.

use ndarray::Array2;

use super::fft::convolve_circular;
use super::field::{ImageField, KernelField};
use crate::error::{FimaError, Result};
use crate::rng::CounterRng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Gaussian { size: usize, sigma: f64 },
    /// Length and angle are drawn from the seed.
    Motion { size: usize },
    Delta,
}

impl KernelKind {
    pub fn parse(s: &str, size: Option<usize>) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelKind::Gaussian { size: size.unwrap_or(9), sigma: 1.6 }),
            "motion" | "motion-line" => Ok(KernelKind::Motion { size: size.unwrap_or(11) }),
            "delta" => Ok(KernelKind::Delta),
            other => Err(FimaError::Parse(format!("unknown kernel kind `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Gaussian { .. } => "gaussian",
            KernelKind::Motion { .. } => "motion",
            KernelKind::Delta => "delta",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub z_true: ImageField,
    pub b_true: KernelField,
    pub y: ImageField,
}

/// Piecewise-smooth texture in `[0.05, 0.95]`: a smooth background with
/// overlapping rectangles and disks.
pub fn procedural_texture(size: usize, rng: &mut CounterRng) -> Array2<f64> {
    let n = size as f64;
    let (a, b, c) = (rng.uniform_range(-0.2, 0.2), rng.uniform_range(-0.2, 0.2), rng.uniform_range(0.3, 0.7));
    let mut img = Array2::from_shape_fn((size, size), |(i, j)| c + a * i as f64 / n + b * j as f64 / n);
    let shapes = 6 + (size / 8);
    for _ in 0..shapes {
        let level = rng.uniform_range(0.05, 0.95);
        let (ci, cj) = (rng.uniform_range(0.0, n), rng.uniform_range(0.0, n));
        let r = rng.uniform_range(0.06, 0.22) * n;
        if rng.uniform() < 0.5 {
            let (hh, hw) = (r, rng.uniform_range(0.5, 1.5) * r);
            for ((i, j), v) in img.indexed_iter_mut() {
                if (i as f64 - ci).abs() <= hh && (j as f64 - cj).abs() <= hw {
                    *v = level;
                }
            }
        } else {
            for ((i, j), v) in img.indexed_iter_mut() {
                let (di, dj) = (i as f64 - ci, j as f64 - cj);
                if di * di + dj * dj <= r * r {
                    *v = level;
                }
            }
        }
    }
    img.mapv_inplace(|v| v.clamp(0.05, 0.95));
    img
}

pub fn make_kernel(kind: KernelKind, rng: &mut CounterRng) -> Result<KernelField> {
    match kind {
        KernelKind::Gaussian { size, sigma } => KernelField::gaussian(size, sigma),
        KernelKind::Motion { size } => {
            let length = rng.uniform_range(0.6, 0.9) * (size as f64 - 1.0);
            let angle = rng.uniform_range(0.0, std::f64::consts::PI);
            KernelField::motion_line(size, length, angle)
        }
        KernelKind::Delta => KernelField::delta(1),
    }
}

/// `y = b (x) z + noise_level * N(0, 1)` on a `size x size` texture.
pub fn make_synthetic(seed: u64, size: usize, kind: KernelKind, noise_level: f64) -> Result<SyntheticInstance> {
    if size < 32 {
        return Err(FimaError::InvalidArgument(format!("size must be at least 32, got {size}")));
    }
    if !(0.0..=0.1).contains(&noise_level) {
        return Err(FimaError::InvalidArgument(format!("noise_level must be in [0, 0.1], got {noise_level}")));
    }
    let root = CounterRng::new(seed);
    let z_true = ImageField::new(procedural_texture(size, &mut root.fork(1)))?;
    let b_true = make_kernel(kind, &mut root.fork(2))?;
    let blurred = convolve_circular(&z_true, &b_true)?;
    let mut noise = root.fork(3);
    let y = ImageField::new(blurred.pixels().mapv(|v| v + noise_level * noise.normal()))?;
    Ok(SyntheticInstance { z_true, b_true, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_delta_is_identity() {
        let inst = make_synthetic(4, 32, KernelKind::Delta, 0.0).unwrap();
        assert!((inst.y.pixels() - inst.z_true.pixels()).iter().all(|d| d.abs() <= 1e-12));
    }

    #[test]
    fn seeded_and_noise_level() {
        let a = make_synthetic(9, 64, KernelKind::Motion { size: 11 }, 0.01).unwrap();
        let b = make_synthetic(9, 64, KernelKind::Motion { size: 11 }, 0.01).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.b_true, b.b_true);
        let clean = convolve_circular(&a.z_true, &a.b_true).unwrap();
        let r = a.y.pixels() - clean.pixels();
        let mean = r.mean().unwrap();
        let sd = (r.mapv(|v| (v - mean) * (v - mean)).sum() / (r.len() - 1) as f64).sqrt();
        assert!((0.009..=0.011).contains(&sd), "{sd}");
    }

    #[test]
    fn parameter_checks() {
        assert!(make_synthetic(0, 16, KernelKind::Delta, 0.0).is_err());
        assert!(make_synthetic(0, 32, KernelKind::Delta, 0.2).is_err());
    }
}
