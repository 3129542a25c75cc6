use ndarray::{Array2, Zip};

use super::{Denoiser, ModuleFault};

pub struct IdentityDenoiser;

impl Denoiser for IdentityDenoiser {
    fn label(&self) -> String {
        "identity".into()
    }
    fn denoise(&self, image: &Array2<f64>) -> Result<Array2<f64>, ModuleFault> {
        Ok(image.clone())
    }
}

/// Isotropic TV denoising, `min_z weight TV(z) + 0.5 |z - f|^2`, by a fixed
/// number of Chambolle dual projection steps.
#[derive(Debug, Clone, Copy)]
pub struct TvDenoiser {
    pub weight: f64,
    pub inner_iters: usize,
}

const TV_DUAL_STEP: f64 = 0.125;

impl TvDenoiser {
    pub fn new(weight: f64, inner_iters: usize) -> Self {
        Self { weight, inner_iters }
    }
}

/// Forward differences with a zero last row/column (Neumann boundary).
fn grad(u: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let (h, w) = u.dim();
    let mut gx = Array2::zeros((h, w));
    let mut gy = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            if j + 1 < w {
                gx[[i, j]] = u[[i, j + 1]] - u[[i, j]];
            }
            if i + 1 < h {
                gy[[i, j]] = u[[i + 1, j]] - u[[i, j]];
            }
        }
    }
    (gx, gy)
}

/// Negative adjoint of [`grad`].
fn div(px: &Array2<f64>, py: &Array2<f64>) -> Array2<f64> {
    let (h, w) = px.dim();
    let mut d = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..w {
            let mut v = 0.0;
            if j + 1 < w {
                v += px[[i, j]];
            }
            if j > 0 {
                v -= px[[i, j - 1]];
            }
            if i + 1 < h {
                v += py[[i, j]];
            }
            if i > 0 {
                v -= py[[i - 1, j]];
            }
            d[[i, j]] = v;
        }
    }
    d
}

/// Isotropic total variation with the same discretization.
pub fn total_variation(u: &Array2<f64>) -> f64 {
    let (gx, gy) = grad(u);
    Zip::from(&gx).and(&gy).fold(0.0, |acc, a, b| acc + (a * a + b * b).sqrt())
}

impl Denoiser for TvDenoiser {
    fn label(&self) -> String {
        "tv".into()
    }

    fn denoise(&self, f: &Array2<f64>) -> Result<Array2<f64>, ModuleFault> {
        if self.weight == 0.0 || f.is_empty() {
            return Ok(f.clone());
        }
        if !(self.weight > 0.0) {
            return Err(ModuleFault::Fatal(format!("tv weight must be nonnegative, got {}", self.weight)));
        }
        let (h, w) = f.dim();
        let mut px = Array2::<f64>::zeros((h, w));
        let mut py = Array2::<f64>::zeros((h, w));
        let inv = 1.0 / self.weight;
        for _ in 0..self.inner_iters {
            let mut r = div(&px, &py);
            Zip::from(&mut r).and(f).for_each(|r, &fv| *r -= fv * inv);
            let (gx, gy) = grad(&r);
            Zip::from(&mut px).and(&mut py).and(&gx).and(&gy).for_each(|px, py, &gx, &gy| {
                let denom = 1.0 + TV_DUAL_STEP * (gx * gx + gy * gy).sqrt();
                *px = (*px + TV_DUAL_STEP * gx) / denom;
                *py = (*py + TV_DUAL_STEP * gy) / denom;
            });
        }
        let d = div(&px, &py);
        Ok(f - &(d * self.weight))
    }
}

/// First-order causal + anti-causal exponential smoothing along rows, then
/// columns. Decay `a = exp(-sqrt(2) / sigma)`.
#[derive(Debug, Clone, Copy)]
pub struct RecursiveFilter {
    pub sigma: f64,
}

impl RecursiveFilter {
    pub fn new(sigma: f64) -> Self {
        Self { sigma }
    }

    fn decay(&self) -> f64 {
        if self.sigma <= 0.0 {
            0.0
        } else {
            (-(2f64.sqrt()) / self.sigma).exp()
        }
    }
}

fn smooth_line(line: &mut [f64], a: f64) {
    let n = line.len();
    if n == 0 {
        return;
    }
    let b = 1.0 - a;
    for i in 1..n {
        line[i] = b * line[i] + a * line[i - 1];
    }
    for i in (0..n - 1).rev() {
        line[i] = b * line[i] + a * line[i + 1];
    }
}

impl Denoiser for RecursiveFilter {
    fn label(&self) -> String {
        "rf".into()
    }

    fn denoise(&self, image: &Array2<f64>) -> Result<Array2<f64>, ModuleFault> {
        if !self.sigma.is_finite() || self.sigma < 0.0 {
            return Err(ModuleFault::Fatal(format!("rf sigma must be nonnegative, got {}", self.sigma)));
        }
        let a = self.decay();
        let mut out = image.clone();
        if a == 0.0 {
            return Ok(out);
        }
        let (h, w) = out.dim();
        let mut buf = vec![0.0; h.max(w)];
        for i in 0..h {
            for j in 0..w {
                buf[j] = out[[i, j]];
            }
            smooth_line(&mut buf[..w], a);
            for j in 0..w {
                out[[i, j]] = buf[j];
            }
        }
        for j in 0..w {
            for i in 0..h {
                buf[i] = out[[i, j]];
            }
            smooth_line(&mut buf[..h], a);
            for i in 0..h {
                out[[i, j]] = buf[i];
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn checkerboard(n: usize) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| if (i + j) % 2 == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn tv_constant_is_fixed() {
        let c = Array2::from_elem((16, 16), 0.37);
        let out = TvDenoiser::new(0.2, 20).denoise(&c).unwrap();
        assert_eq!(out, c);
    }

    #[test]
    fn tv_vanishing_weight() {
        let f = checkerboard(16);
        let out = TvDenoiser::new(1e-9, 20).denoise(&f).unwrap();
        let diff = (&out - &f).mapv(|v| v * v).sum().sqrt();
        assert!(diff <= 1e-6, "{diff}");
    }

    #[test]
    fn tv_reduces_checkerboard_variation() {
        let f = checkerboard(16);
        let out = TvDenoiser::new(0.1, 20).denoise(&f).unwrap();
        assert!(total_variation(&out) < total_variation(&f));
    }

    #[test]
    fn rf_constant_and_mass() {
        let c = Array2::from_elem((32, 32), 0.61);
        let out = RecursiveFilter::new(3.0).denoise(&c).unwrap();
        assert!((&out - &c).iter().all(|d| d.abs() <= 1e-9));

        let mut imp = Array2::zeros((64, 64));
        imp[[32, 32]] = 1.0;
        let out = RecursiveFilter::new(2.0).denoise(&imp).unwrap();
        assert!((out.sum() - 1.0).abs() <= 1e-6, "{}", out.sum());
        assert!(out[[32, 32]] < 1.0);
    }

    #[test]
    fn rf_vanishing_sigma() {
        let f = checkerboard(8);
        let out = RecursiveFilter::new(1e-6).denoise(&f).unwrap();
        assert!((&out - &f).iter().all(|d| d.abs() <= 1e-12));
    }

    #[test]
    fn denoisers_are_deterministic() {
        let f = Array2::from_shape_fn((16, 16), |(i, j)| ((i * 7 + j * 3) % 5) as f64 / 5.0);
        let tv = TvDenoiser::new(0.1, 20);
        assert_eq!(tv.denoise(&f).unwrap(), tv.denoise(&f).unwrap());
        let rf = RecursiveFilter::new(1.5);
        assert_eq!(rf.denoise(&f).unwrap(), rf.denoise(&f).unwrap());
    }
}
