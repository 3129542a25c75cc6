use ndarray::{s, Array2};

use crate::error::{FimaError, Result};
use crate::modules::ImageTransform;

/// Orthonormal multi-level 2-D Haar transform.
///
/// Coefficients are stored in place: after `levels` steps the top-left
/// `(h >> levels) x (w >> levels)` block holds the coarse band. With
/// `levels = 0` the transform is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HaarWavelet {
    levels: usize,
    height: usize,
    width: usize,
}

impl HaarWavelet {
    pub fn new(height: usize, width: usize, levels: usize) -> Result<Self> {
        let m = 1usize << levels;
        if height == 0 || width == 0 || !height.is_multiple_of(m) || !width.is_multiple_of(m) {
            return Err(FimaError::InvalidArgument(format!(
                "{height}x{width} is not divisible by 2^{levels} for the Haar transform"
            )));
        }
        Ok(Self { levels, height, width })
    }

    /// The deepest transform up to `max_levels` that both dimensions allow.
    pub fn fit(height: usize, width: usize, max_levels: usize) -> Result<Self> {
        let mut levels = 0;
        while levels < max_levels && height.is_multiple_of(1 << (levels + 1)) && width.is_multiple_of(1 << (levels + 1)) {
            levels += 1;
        }
        Self::new(height, width, levels)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn check(&self, a: &Array2<f64>) {
        assert_eq!(a.dim(), (self.height, self.width), "Haar transform shape mismatch");
    }

    pub fn wavelet_forward(&self, image: &Array2<f64>) -> Array2<f64> {
        self.check(image);
        let mut out = image.to_owned();
        let (mut h, mut w) = (self.height, self.width);
        for _ in 0..self.levels {
            let block = out.slice(s![..h, ..w]).to_owned();
            out.slice_mut(s![..h, ..w]).assign(&analyze(&block));
            h /= 2;
            w /= 2;
        }
        out
    }

    pub fn wavelet_inverse(&self, coeffs: &Array2<f64>) -> Array2<f64> {
        self.check(coeffs);
        let mut out = coeffs.to_owned();
        for l in (0..self.levels).rev() {
            let (h, w) = (self.height >> l, self.width >> l);
            let block = out.slice(s![..h, ..w]).to_owned();
            out.slice_mut(s![..h, ..w]).assign(&synthesize(&block));
        }
        out
    }
}

const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn analyze(a: &Array2<f64>) -> Array2<f64> {
    let (h, w) = a.dim();
    let (hh, hw) = (h / 2, w / 2);
    let mut rows = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..hw {
            let (p, q) = (a[[i, 2 * j]], a[[i, 2 * j + 1]]);
            rows[[i, j]] = (p + q) * R;
            rows[[i, hw + j]] = (p - q) * R;
        }
    }
    let mut out = Array2::zeros((h, w));
    for j in 0..w {
        for i in 0..hh {
            let (p, q) = (rows[[2 * i, j]], rows[[2 * i + 1, j]]);
            out[[i, j]] = (p + q) * R;
            out[[hh + i, j]] = (p - q) * R;
        }
    }
    out
}

fn synthesize(c: &Array2<f64>) -> Array2<f64> {
    let (h, w) = c.dim();
    let (hh, hw) = (h / 2, w / 2);
    let mut rows = Array2::zeros((h, w));
    for j in 0..w {
        for i in 0..hh {
            let (s, d) = (c[[i, j]], c[[hh + i, j]]);
            rows[[2 * i, j]] = (s + d) * R;
            rows[[2 * i + 1, j]] = (s - d) * R;
        }
    }
    let mut out = Array2::zeros((h, w));
    for i in 0..h {
        for j in 0..hw {
            let (s, d) = (rows[[i, j]], rows[[i, hw + j]]);
            out[[i, 2 * j]] = (s + d) * R;
            out[[i, 2 * j + 1]] = (s - d) * R;
        }
    }
    out
}

impl ImageTransform for HaarWavelet {
    fn forward(&self, image: &Array2<f64>) -> Array2<f64> {
        self.wavelet_forward(image)
    }

    fn inverse(&self, coeffs: &Array2<f64>) -> Array2<f64> {
        self.wavelet_inverse(coeffs)
    }
}
