use ndarray::{Array1, Array2};

use crate::error::{FimaError, Result};
use crate::prox::project_simplex;

/// A finite, non-empty grayscale raster, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageField {
    pixels: Array2<f64>,
}

impl ImageField {
    pub fn new(pixels: Array2<f64>) -> Result<Self> {
        if pixels.is_empty() {
            return Err(FimaError::InvalidArgument("image must have positive dimensions".into()));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(FimaError::InvalidArgument("image contains non-finite pixels".into()));
        }
        Ok(Self { pixels })
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Result<Self> {
        Self::new(Array2::from_elem((height, width), value))
    }

    /// Row-major vector of length `height * width`.
    pub fn from_vector(height: usize, width: usize, v: &Array1<f64>) -> Result<Self> {
        if v.len() != height * width {
            return Err(FimaError::DimensionMismatch { expected: height * width, got: v.len() });
        }
        Self::new(Array2::from_shape_vec((height, width), v.to_vec()).expect("shape checked"))
    }

    pub fn height(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.pixels.dim()
    }

    pub fn pixels(&self) -> &Array2<f64> {
        &self.pixels
    }

    pub fn into_pixels(self) -> Array2<f64> {
        self.pixels
    }

    pub fn to_vector(&self) -> Array1<f64> {
        Array1::from_iter(self.pixels.iter().copied())
    }
}

/// A blur kernel with odd height and width; the center tap is at
/// `(kh / 2, kw / 2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    taps: Array2<f64>,
}

impl KernelField {
    pub fn new(taps: Array2<f64>) -> Result<Self> {
        let (kh, kw) = taps.dim();
        if kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 {
            return Err(FimaError::InvalidArgument(format!("kernel size must be odd and positive, got {kh}x{kw}")));
        }
        if taps.iter().any(|v| !v.is_finite()) {
            return Err(FimaError::InvalidArgument("kernel contains non-finite taps".into()));
        }
        Ok(Self { taps })
    }

    pub fn from_vector(kh: usize, kw: usize, v: &Array1<f64>) -> Result<Self> {
        if v.len() != kh * kw {
            return Err(FimaError::DimensionMismatch { expected: kh * kw, got: v.len() });
        }
        Self::new(Array2::from_shape_vec((kh, kw), v.to_vec()).expect("shape checked"))
    }

    pub fn delta(size: usize) -> Result<Self> {
        let mut taps = Array2::zeros((size, size));
        if size > 0 {
            taps[[size / 2, size / 2]] = 1.0;
        }
        Self::new(taps)
    }

    pub fn uniform(size: usize) -> Result<Self> {
        Self::new(Array2::from_elem((size, size), 1.0 / (size * size).max(1) as f64))
    }

    /// Normalized isotropic Gaussian.
    pub fn gaussian(size: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(FimaError::InvalidArgument(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let c = (size / 2) as f64;
        let taps = Array2::from_shape_fn((size, size), |(i, j)| {
            let (di, dj) = (i as f64 - c, j as f64 - c);
            (-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp()
        });
        let s = taps.sum();
        Self::new(taps / s)
    }

    /// Normalized straight motion blur of the given length (in pixels) and
    /// angle (radians), rasterized by dense sampling along the segment.
    pub fn motion_line(size: usize, length: f64, angle: f64) -> Result<Self> {
        let mut taps = Array2::<f64>::zeros((size, size));
        let c = (size / 2) as f64;
        let half = 0.5 * length.min(size as f64 - 1.0);
        let samples = 64 * size;
        for s in 0..=samples {
            let t = -half + 2.0 * half * s as f64 / samples as f64;
            let (y, x) = (c + t * angle.sin(), c + t * angle.cos());
            // bilinear splat
            let (y0, x0) = (y.floor(), x.floor());
            let (fy, fx) = (y - y0, x - x0);
            for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
                for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
                    let (yy, xx) = (y0 + dy, x0 + dx);
                    if yy >= 0.0 && xx >= 0.0 && (yy as usize) < size && (xx as usize) < size {
                        taps[[yy as usize, xx as usize]] += wy * wx;
                    }
                }
            }
        }
        let s = taps.sum();
        Self::new(taps / s)
    }

    pub fn height(&self) -> usize {
        self.taps.nrows()
    }

    pub fn width(&self) -> usize {
        self.taps.ncols()
    }

    pub fn dim(&self) -> (usize, usize) {
        self.taps.dim()
    }

    pub fn taps(&self) -> &Array2<f64> {
        &self.taps
    }

    pub fn to_vector(&self) -> Array1<f64> {
        Array1::from_iter(self.taps.iter().copied())
    }

    pub fn is_on_simplex(&self, tol: f64) -> bool {
        self.taps.iter().all(|v| *v >= 0.0) && (self.taps.sum() - 1.0).abs() <= tol
    }

    /// Euclidean projection of the taps onto the probability simplex.
    pub fn project(&self) -> Result<Self> {
        let p = project_simplex(&self.to_vector())?;
        Self::from_vector(self.height(), self.width(), &p)
    }
}
