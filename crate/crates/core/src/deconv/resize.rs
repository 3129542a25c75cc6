use ndarray::Array2;

use super::field::KernelField;
use crate::error::Result;

fn cubic(t: f64) -> f64 {
    // Keys kernel, a = -0.5
    let a = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a
    } else {
        0.0
    }
}

/// Source coordinate of output sample `i` for pixel-center alignment.
fn source(i: usize, scale: f64) -> f64 {
    (i as f64 + 0.5) / scale - 0.5
}

/// Bicubic resampling with clamped borders.
pub fn resize_bicubic(image: &Array2<f64>, height: usize, width: usize) -> Array2<f64> {
    let (h, w) = image.dim();
    if (h, w) == (height, width) {
        return image.clone();
    }
    let (sy, sx) = (height as f64 / h as f64, width as f64 / w as f64);
    let at = |i: isize, j: isize| image[[i.clamp(0, h as isize - 1) as usize, j.clamp(0, w as isize - 1) as usize]];
    Array2::from_shape_fn((height, width), |(i, j)| {
        let (y, x) = (source(i, sy), source(j, sx));
        let (y0, x0) = (y.floor() as isize, x.floor() as isize);
        let mut acc = 0.0;
        for m in -1..=2 {
            let wy = cubic(y - (y0 + m) as f64);
            for n in -1..=2 {
                acc += wy * cubic(x - (x0 + n) as f64) * at(y0 + m, x0 + n);
            }
        }
        acc
    })
}

/// Bilinear resampling with zero padding outside the support.
pub fn resize_bilinear(image: &Array2<f64>, height: usize, width: usize) -> Array2<f64> {
    let (h, w) = image.dim();
    let (sy, sx) = (height as f64 / h as f64, width as f64 / w as f64);
    let at = |i: isize, j: isize| {
        if i < 0 || j < 0 || i >= h as isize || j >= w as isize {
            0.0
        } else {
            image[[i as usize, j as usize]]
        }
    };
    Array2::from_shape_fn((height, width), |(i, j)| {
        let (y, x) = (source(i, sy), source(j, sx));
        let (y0, x0) = (y.floor(), x.floor());
        let (fy, fx) = (y - y0, x - x0);
        let (y0, x0) = (y0 as isize, x0 as isize);
        (1.0 - fy) * ((1.0 - fx) * at(y0, x0) + fx * at(y0, x0 + 1))
            + fy * ((1.0 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1))
    })
}

/// Bilinear kernel resize, then renormalization and simplex projection.
pub fn resize_kernel(kernel: &KernelField, size: usize) -> Result<KernelField> {
    let size = size.max(1) | 1;
    let mut taps = resize_bilinear(kernel.taps(), size, size).mapv(|v| v.max(0.0));
    let s = taps.sum();
    if s > 0.0 {
        taps /= s;
    } else {
        return KernelField::delta(size);
    }
    KernelField::new(taps)?.project()
}
