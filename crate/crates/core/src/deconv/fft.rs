//! Periodic 2-D convolution by FFT.

use std::sync::Arc;

use ndarray::{Array2, Zip};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::field::{ImageField, KernelField};
use crate::error::{FimaError, Result};

/// Forward and inverse 2-D transforms of a fixed size.
#[derive(Clone)]
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn run(&self, data: &mut Array2<Complex64>, rows: &dyn Fft<f64>, cols: &dyn Fft<f64>) {
        let (h, w) = (self.height, self.width);
        {
            let buf = data.as_slice_mut().expect("standard layout");
            for r in 0..h {
                rows.process(&mut buf[r * w..(r + 1) * w]);
            }
        }
        let mut col = vec![Complex64::new(0.0, 0.0); h];
        for c in 0..w {
            for r in 0..h {
                col[r] = data[[r, c]];
            }
            cols.process(&mut col);
            for r in 0..h {
                data[[r, c]] = col[r];
            }
        }
    }

    pub fn forward(&self, real: &Array2<f64>) -> Array2<Complex64> {
        let mut data = real.mapv(|v| Complex64::new(v, 0.0));
        if !data.is_standard_layout() {
            data = data.as_standard_layout().to_owned();
        }
        self.run(&mut data, self.row_fwd.as_ref(), self.col_fwd.as_ref());
        data
    }

    /// Inverse transform, normalized, real part.
    pub fn inverse_real(&self, spectrum: &Array2<Complex64>) -> Array2<f64> {
        let mut data = spectrum.as_standard_layout().to_owned();
        self.run(&mut data, self.row_inv.as_ref(), self.col_inv.as_ref());
        let scale = 1.0 / (self.height * self.width) as f64;
        data.mapv(|c| c.re * scale)
    }
}

/// Places the kernel in an `h x w` array with its center at the origin,
/// wrapping negative offsets.
pub fn kernel_to_image(kernel: &Array2<f64>, height: usize, width: usize) -> Array2<f64> {
    let (kh, kw) = kernel.dim();
    let (ch, cw) = (kh / 2, kw / 2);
    let mut out = Array2::zeros((height, width));
    for a in 0..kh {
        for b in 0..kw {
            let i = (a + height * kh - ch) % height;
            let j = (b + width * kw - cw) % width;
            out[[i, j]] += kernel[[a, b]];
        }
    }
    out
}

/// Inverse of [`kernel_to_image`] restricted to a `kh x kw` window.
pub fn image_to_kernel(image: &Array2<f64>, kh: usize, kw: usize) -> Array2<f64> {
    let (h, w) = image.dim();
    let (ch, cw) = (kh / 2, kw / 2);
    Array2::from_shape_fn((kh, kw), |(a, b)| image[[(a + h * kh - ch) % h, (b + w * kw - cw) % w]])
}

/// Circular convolution with a fixed kernel, `B x`, and its adjoint.
#[derive(Clone)]
pub struct CircularConvolution {
    fft: Fft2,
    otf: Array2<Complex64>,
}

impl CircularConvolution {
    pub fn new(kernel: &KernelField, height: usize, width: usize) -> Result<Self> {
        Self::with_fft(kernel.taps(), Fft2::new(height, width))
    }

    pub fn with_fft(kernel: &Array2<f64>, fft: Fft2) -> Result<Self> {
        let (h, w) = fft.dim();
        let (kh, kw) = kernel.dim();
        if kh > h || kw > w {
            return Err(FimaError::InvalidArgument(format!("kernel {kh}x{kw} is larger than image {h}x{w}")));
        }
        let otf = fft.forward(&kernel_to_image(kernel, h, w));
        Ok(Self { fft, otf })
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Frequency response of the kernel.
    pub fn otf(&self) -> &Array2<Complex64> {
        &self.otf
    }

    pub fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut s = self.fft.forward(x);
        Zip::from(&mut s).and(&self.otf).for_each(|s, k| *s *= k);
        self.fft.inverse_real(&s)
    }

    pub fn adjoint(&self, r: &Array2<f64>) -> Array2<f64> {
        let mut s = self.fft.forward(r);
        Zip::from(&mut s).and(&self.otf).for_each(|s, k| *s *= k.conj());
        self.fft.inverse_real(&s)
    }

    /// `max |K(w)|^2`, the squared spectral norm of `B`.
    pub fn spectral_norm_sq(&self) -> f64 {
        self.otf.iter().fold(0.0, |m, c| m.max(c.norm_sqr()))
    }
}

/// `b (x) z` with periodic boundaries.
pub fn convolve_circular(image: &ImageField, kernel: &KernelField) -> Result<ImageField> {
    let conv = CircularConvolution::new(kernel, image.height(), image.width())?;
    ImageField::new(conv.apply(image.pixels()))
}

/// The same convolution by direct summation; used as a reference.
pub fn convolve_circular_direct(image: &Array2<f64>, kernel: &Array2<f64>) -> Array2<f64> {
    let (h, w) = image.dim();
    let (kh, kw) = kernel.dim();
    let (ch, cw) = ((kh / 2) as isize, (kw / 2) as isize);
    Array2::from_shape_fn((h, w), |(i, j)| {
        let mut acc = 0.0;
        for a in 0..kh {
            for b in 0..kw {
                let si = (i as isize - (a as isize - ch)).rem_euclid(h as isize) as usize;
                let sj = (j as isize - (b as isize - cw)).rem_euclid(w as isize) as usize;
                acc += kernel[[a, b]] * image[[si, sj]];
            }
        }
        acc
    })
}
