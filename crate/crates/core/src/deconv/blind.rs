//! Blind deconvolution in the gradient domain.
//!
//! The unknowns are a two-channel gradient field `x = (x_h, x_v)` and a
//! kernel `b` on the simplex; the coupling term is
//! `f(x, b) = sum_c |grad_c y - b (x) x_c|^2` with periodic forward
//! differences. [`solve_blind`] runs the two-block iteration on a
//! coarse-to-fine pyramid.

use std::sync::Arc;

use ndarray::{s, Array1, Array2, Zip};
use rustfft::num_complex::Complex64;

use super::fft::{image_to_kernel, kernel_to_image, Fft2};
use super::field::{ImageField, KernelField};
use super::resize::{resize_bicubic, resize_kernel};
use crate::error::{FimaError, Result};
use crate::modules::{Denoiser, DenoiserModule, Module, ModuleFault};
use crate::prox::ScalarPenalty;
use crate::solvers::{
    solve_mfima_observed, BlockModule, BlockModules, BlockProblem, BlockSmooth, BlockState, JointModule, MfimaConfig,
    PenaltyRule, StepRules,
};
use crate::trace::{IterateTrace, StopReason};

pub const CG_MAX_ITERS: usize = 200;
pub const CG_RTOL: f64 = 1e-6;

/// Periodic forward differences `(x[i, j+1] - x[i, j], x[i+1, j] - x[i, j])`.
pub fn image_gradients(image: &Array2<f64>) -> [Array2<f64>; 2] {
    let (h, w) = image.dim();
    let gh = Array2::from_shape_fn((h, w), |(i, j)| image[[i, (j + 1) % w]] - image[[i, j]]);
    let gv = Array2::from_shape_fn((h, w), |(i, j)| image[[(i + 1) % h, j]] - image[[i, j]]);
    [gh, gv]
}

/// Result of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite `apply`.
pub fn conjugate_gradient(
    apply: impl Fn(&Array1<f64>) -> Array1<f64>,
    rhs: &Array1<f64>,
    x0: &Array1<f64>,
    rtol: f64,
    max_iters: usize,
) -> Result<CgSolution> {
    let rhs_norm = rhs.dot(rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok(CgSolution { x: Array1::zeros(rhs.len()), iterations: 0, relative_residual: 0.0 });
    }
    let mut x = x0.clone();
    let mut r = rhs - &apply(&x);
    let mut p = r.clone();
    let mut rr = r.dot(&r);
    for it in 0..=max_iters {
        let rel = rr.sqrt() / rhs_norm;
        if rel <= rtol {
            return Ok(CgSolution { x, iterations: it, relative_residual: rel });
        }
        if it == max_iters {
            break;
        }
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if !(pap > 0.0) {
            return Err(FimaError::SubproblemFailure(format!("CG lost positive curvature at iteration {it}")));
        }
        let alpha = rr / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rr_new = r.dot(&r);
        p = &r + &(&p * (rr_new / rr));
        rr = rr_new;
    }
    Err(FimaError::SubproblemFailure(format!(
        "CG did not reach relative residual {rtol:e} in {max_iters} iterations ({:e})",
        rr.sqrt() / rhs_norm
    )))
}

/// Observed gradients with cached spectra; shared by the blind operators.
#[derive(Clone)]
pub struct GradientData {
    fft: Fft2,
    grads: [Array2<f64>; 2],
    grads_hat: [Array2<Complex64>; 2],
    kernel_dim: (usize, usize),
}

impl GradientData {
    pub fn new(y: &ImageField, kernel_dim: (usize, usize)) -> Result<Self> {
        Self::from_gradients(image_gradients(y.pixels()), kernel_dim)
    }

    pub fn from_gradients(grads: [Array2<f64>; 2], kernel_dim: (usize, usize)) -> Result<Self> {
        let (h, w) = grads[0].dim();
        let (kh, kw) = kernel_dim;
        if grads[1].dim() != (h, w) {
            return Err(FimaError::DimensionMismatch { expected: h * w, got: grads[1].len() });
        }
        if kh % 2 == 0 || kw % 2 == 0 || kh > h || kw > w {
            return Err(FimaError::InvalidArgument(format!("kernel {kh}x{kw} does not fit image {h}x{w}")));
        }
        let fft = Fft2::new(h, w);
        let grads_hat = [fft.forward(&grads[0]), fft.forward(&grads[1])];
        Ok(Self { fft, grads, grads_hat, kernel_dim })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.fft.dim()
    }

    pub fn kernel_dim(&self) -> (usize, usize) {
        self.kernel_dim
    }

    pub fn gradients(&self) -> &[Array2<f64>; 2] {
        &self.grads
    }

    fn plane(&self) -> usize {
        let (h, w) = self.dim();
        h * w
    }

    /// Splits a stacked `2 h w` vector into its channels.
    pub fn channels(&self, x: &Array1<f64>) -> [Array2<f64>; 2] {
        let p = self.plane();
        let dim = self.dim();
        let ch = |c: usize| Array2::from_shape_vec(dim, x.slice(s![c * p..(c + 1) * p]).to_vec()).expect("plane");
        [ch(0), ch(1)]
    }

    pub fn stack(channels: &[Array2<f64>; 2]) -> Array1<f64> {
        channels[0].iter().chain(channels[1].iter()).copied().collect()
    }

    fn kernel_grid(&self, b: &Array1<f64>) -> Array2<f64> {
        Array2::from_shape_vec(self.kernel_dim, b.to_vec()).expect("kernel dimension")
    }

    fn otf(&self, b: &Array1<f64>) -> Array2<Complex64> {
        let (h, w) = self.dim();
        self.fft.forward(&kernel_to_image(&self.kernel_grid(b), h, w))
    }

    fn mul(&self, a: &Array2<Complex64>, b: &Array2<Complex64>, conj_a: bool) -> Array2<f64> {
        let mut out = b.clone();
        Zip::from(&mut out).and(a).for_each(|o, a| *o *= if conj_a { a.conj() } else { *a });
        self.fft.inverse_real(&out)
    }

    /// `b (x) x_c - grad_c y` for both channels.
    fn residuals(&self, x_hat: &[Array2<Complex64>; 2], k_hat: &Array2<Complex64>) -> [Array2<f64>; 2] {
        [0, 1].map(|c| self.mul(k_hat, &x_hat[c], false) - &self.grads[c])
    }

    fn spectra(&self, x: &Array1<f64>) -> [Array2<Complex64>; 2] {
        let ch = self.channels(x);
        [self.fft.forward(&ch[0]), self.fft.forward(&ch[1])]
    }

    /// `sum_c X_c^T r_c`, restricted to the kernel window.
    fn kernel_adjoint(&self, x_hat: &[Array2<Complex64>; 2], r: &[Array2<f64>; 2]) -> Array1<f64> {
        let (kh, kw) = self.kernel_dim;
        let mut acc = Array2::<f64>::zeros(self.dim());
        for c in 0..2 {
            acc += &self.mul(&x_hat[c], &self.fft.forward(&r[c]), true);
        }
        Array1::from_iter(image_to_kernel(&acc, kh, kw))
    }

    /// `(sum_c X_c^T X_c) b`.
    fn kernel_normal(&self, x_hat: &[Array2<Complex64>; 2], b: &Array1<f64>) -> Array1<f64> {
        let k_hat = self.otf(b);
        let conv = [0, 1].map(|c| self.mul(&k_hat, &x_hat[c], false));
        self.kernel_adjoint(x_hat, &conv)
    }

    /// `sum_c X_c^T grad_c y`.
    fn kernel_rhs(&self, x_hat: &[Array2<Complex64>; 2]) -> Array1<f64> {
        self.kernel_adjoint(x_hat, &self.grads)
    }
}

/// `f(x, b) = sum_c |grad_c y - b (x) x_c|^2` with blocks `[x, b]`.
#[derive(Clone)]
pub struct BlindCoupling {
    data: Arc<GradientData>,
}

impl BlindCoupling {
    pub fn new(data: Arc<GradientData>) -> Self {
        Self { data }
    }
}

impl BlockSmooth for BlindCoupling {
    fn value(&self, blocks: &[Array1<f64>]) -> f64 {
        let d = &self.data;
        let r = d.residuals(&d.spectra(&blocks[0]), &d.otf(&blocks[1]));
        r.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>()).sum()
    }

    fn partial_gradient(&self, blocks: &[Array1<f64>], n: usize) -> Array1<f64> {
        let d = &self.data;
        let x_hat = d.spectra(&blocks[0]);
        let k_hat = d.otf(&blocks[1]);
        let r = d.residuals(&x_hat, &k_hat);
        if n == 0 {
            let g = [0, 1].map(|c| d.mul(&k_hat, &d.fft.forward(&r[c]), true));
            GradientData::stack(&g) * 2.0
        } else {
            d.kernel_adjoint(&x_hat, &r) * 2.0
        }
    }

    fn block_lipschitz(&self, blocks: &[Array1<f64>], n: usize) -> f64 {
        let d = &self.data;
        if n == 0 {
            2.0 * d.otf(&blocks[1]).iter().fold(0.0f64, |m, k| m.max(k.norm_sqr()))
        } else {
            // spectral bound on sum_c X_c^T X_c
            let x_hat = d.spectra(&blocks[0]);
            let mut m = 0.0f64;
            Zip::from(&x_hat[0]).and(&x_hat[1]).for_each(|a, b| m = m.max(a.norm_sqr() + b.norm_sqr()));
            2.0 * m
        }
    }
}

/// One alternating sweep of
/// `argmin |grad y - b (x) x|^2 + tau_x |x - x^k|^2 + tau_b |b - b^k|^2`:
/// exact FFT solve in `x`, then CG in `b`.
pub fn af_blind(
    x: &Array1<f64>,
    b: &Array1<f64>,
    data: &GradientData,
    tau_x: f64,
    tau_b: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if !(tau_x > 0.0 && tau_b > 0.0) {
        return Err(FimaError::InvalidArgument(format!("tau_x and tau_b must be positive, got {tau_x}, {tau_b}")));
    }
    let x_new = solve_gradient_subproblem(x, b, data, tau_x);
    let x_hat = data.spectra(&x_new);
    let rhs = data.kernel_rhs(&x_hat) + &(b * tau_b);
    let sol = conjugate_gradient(|v| data.kernel_normal(&x_hat, v) + &(v * tau_b), &rhs, b, CG_RTOL, CG_MAX_ITERS)?;
    Ok((x_new, sol.x))
}

/// `argmin_x |grad y - b (x) x|^2 + tau_x |x - x^k|^2` per channel by FFT.
pub fn solve_gradient_subproblem(x: &Array1<f64>, b: &Array1<f64>, data: &GradientData, tau_x: f64) -> Array1<f64> {
    let k_hat = data.otf(b);
    let x_hat = data.spectra(x);
    let out = [0, 1].map(|c| {
        let mut s = Array2::<Complex64>::zeros(data.dim());
        Zip::from(&mut s).and(&k_hat).and(&data.grads_hat[c]).and(&x_hat[c]).for_each(|s, k, g, xk| {
            *s = (k.conj() * g + xk * tau_x) / (k.norm_sqr() + tau_x);
        });
        data.fft.inverse_real(&s)
    });
    GradientData::stack(&out)
}

/// Relative residual of the `x` normal equations at `x_out`.
pub fn gradient_subproblem_residual(
    x_out: &Array1<f64>,
    x_in: &Array1<f64>,
    b: &Array1<f64>,
    data: &GradientData,
    tau_x: f64,
) -> f64 {
    let k_hat = data.otf(b);
    let (xo, xi) = (data.channels(x_out), data.channels(x_in));
    let (mut num, mut den) = (0.0, 0.0);
    for c in 0..2 {
        let bx = data.mul(&k_hat, &data.fft.forward(&xo[c]), false);
        let lhs = data.mul(&k_hat, &data.fft.forward(&bx), true) + &xo[c] * tau_x;
        let rhs = data.mul(&k_hat, &data.grads_hat[c], true) + &xi[c] * tau_x;
        num += (&lhs - &rhs).mapv(|v| v * v).sum();
        den += rhs.mapv(|v| v * v).sum();
    }
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Relative residual of `(X^T X + lambda I) b = X^T grad y`.
pub fn kernel_residual(b: &Array1<f64>, x: &Array1<f64>, data: &GradientData, lambda_b: f64) -> f64 {
    let x_hat = data.spectra(x);
    let rhs = data.kernel_rhs(&x_hat);
    let r = data.kernel_normal(&x_hat, b) + &(b * lambda_b) - &rhs;
    let den = rhs.dot(&rhs).sqrt();
    if den == 0.0 {
        r.dot(&r).sqrt()
    } else {
        r.dot(&r).sqrt() / den
    }
}

/// Tikhonov kernel estimate `argmin_b |grad y - b (x) x|^2 + lambda_b |b|^2`
/// by CG. The result is not projected onto the simplex.
pub fn estimate_kernel_cg(x: &Array1<f64>, data: &GradientData, lambda_b: f64) -> Result<KernelField> {
    if !(lambda_b > 0.0) {
        return Err(FimaError::InvalidArgument(format!("lambda_b must be positive, got {lambda_b}")));
    }
    let (kh, kw) = data.kernel_dim;
    let x_hat = data.spectra(x);
    let rhs = data.kernel_rhs(&x_hat);
    let sol = conjugate_gradient(
        |v| data.kernel_normal(&x_hat, v) + &(v * lambda_b),
        &rhs,
        &Array1::zeros(kh * kw),
        CG_RTOL,
        CG_MAX_ITERS,
    )?;
    KernelField::from_vector(kh, kw, &sol.x)
}

/// `A_f`: [`af_blind`] on the pair.
pub struct BlindDataModule {
    pub data: Arc<GradientData>,
    pub tau_x: f64,
    pub tau_b: f64,
}

impl JointModule for BlindDataModule {
    fn label(&self) -> String {
        format!("af_blind(tau_x={:e},tau_b={:e})", self.tau_x, self.tau_b)
    }

    fn apply(&self, blocks: &[Array1<f64>]) -> std::result::Result<Vec<Array1<f64>>, ModuleFault> {
        match af_blind(&blocks[0], &blocks[1], &self.data, self.tau_x, self.tau_b) {
            Ok((x, b)) => Ok(vec![x, b]),
            Err(FimaError::SubproblemFailure(m)) => Err(ModuleFault::Recoverable(m)),
            Err(e) => Err(ModuleFault::Fatal(e.to_string())),
        }
    }
}

/// `A_{g_x}`: a unary module applied to the gradient block of the joint output.
pub struct GradientBlockModule {
    pub inner: Arc<dyn Module>,
}

impl BlockModule for GradientBlockModule {
    fn label(&self) -> String {
        self.inner.label()
    }

    fn apply(&self, joint: &[Array1<f64>], n: usize) -> std::result::Result<Array1<f64>, ModuleFault> {
        self.inner.apply(&joint[n])
    }
}

/// `A_{g_b}`: [`estimate_kernel_cg`] against the gradient block of the joint
/// output, after hard-thresholding it at `edge_threshold` times its largest
/// magnitude, then projected onto the simplex.
pub struct KernelEstimateModule {
    pub data: Arc<GradientData>,
    pub lambda_b: f64,
    pub edge_threshold: f64,
}

impl BlockModule for KernelEstimateModule {
    fn label(&self) -> String {
        format!("kernel_cg(lambda_b={:e})", self.lambda_b)
    }

    fn apply(&self, joint: &[Array1<f64>], _n: usize) -> std::result::Result<Array1<f64>, ModuleFault> {
        let x = &joint[0];
        let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cut = self.edge_threshold * peak;
        let edges = x.mapv(|v| if v.abs() > cut { v } else { 0.0 });
        let k = match estimate_kernel_cg(&edges, &self.data, self.lambda_b) {
            Ok(k) => k,
            Err(FimaError::SubproblemFailure(m)) => return Err(ModuleFault::Recoverable(m)),
            Err(e) => return Err(ModuleFault::Fatal(e.to_string())),
        };
        match k.project() {
            Ok(p) => Ok(p.to_vector()),
            Err(e) => Err(ModuleFault::Fatal(e.to_string())),
        }
    }
}

/// Settings for [`solve_blind`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlindOptions {
    pub kernel_size: usize,
    pub scales: usize,
    pub lambda_x: f64,
    pub lambda_b: f64,
    pub tau_x: f64,
    pub tau_b: f64,
    pub sweeps_per_scale: usize,
    pub tol: f64,
    /// `mu_b = mu_factor_b / gamma_b` for the convex kernel block.
    pub mu_factor_b: f64,
    /// Relative cut applied to the gradients before kernel estimation.
    pub edge_threshold: f64,
    /// Width of the Gaussian the coarsest scale starts from.
    pub init_sigma: f64,
    /// Use [`BlindDataModule`] and [`KernelEstimateModule`]; identity when false.
    pub use_modules: bool,
}

impl Default for BlindOptions {
    fn default() -> Self {
        Self {
            kernel_size: 11,
            scales: 3,
            lambda_x: 4e-3,
            lambda_b: 2.0,
            tau_x: 1e-3,
            tau_b: 1.0,
            sweeps_per_scale: 30,
            tol: 1e-4,
            mu_factor_b: 0.1,
            edge_threshold: 0.1,
            init_sigma: 1.0,
            use_modules: true,
        }
    }
}

impl BlindOptions {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size == 0 || self.kernel_size.is_multiple_of(2) {
            return Err(FimaError::InvalidArgument(format!("kernel_size must be odd, got {}", self.kernel_size)));
        }
        if self.scales == 0 {
            return Err(FimaError::InvalidArgument("scales must be at least 1".into()));
        }
        if self.sweeps_per_scale == 0 {
            return Err(FimaError::InvalidConfig("sweeps_per_scale must be positive".into()));
        }
        for (name, v) in [("lambda_b", self.lambda_b), ("tau_x", self.tau_x), ("tau_b", self.tau_b)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FimaError::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.lambda_x >= 0.0) {
            return Err(FimaError::InvalidConfig(format!("lambda_x must be nonnegative, got {}", self.lambda_x)));
        }
        if !(self.mu_factor_b > 0.0) {
            return Err(FimaError::InvalidConfig(format!("mu_factor_b must be positive, got {}", self.mu_factor_b)));
        }
        Ok(())
    }
}

/// Per-scale geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScaleLevel {
    pub height: usize,
    pub width: usize,
    pub kernel_size: usize,
}

pub const PYRAMID_FACTOR: f64 = 0.75;

/// Pyramid levels, coarsest first.
pub fn pyramid(height: usize, width: usize, kernel_size: usize, scales: usize) -> Vec<ScaleLevel> {
    (0..scales)
        .rev()
        .map(|s| {
            let f = PYRAMID_FACTOR.powi(s as i32);
            let k = ((kernel_size as f64 * f).round() as usize).max(3) | 1;
            let k = k.min(kernel_size);
            let h = ((height as f64 * f).round() as usize).max(k);
            let w = ((width as f64 * f).round() as usize).max(k);
            ScaleLevel { height: h, width: w, kernel_size: k }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BlindOutput {
    /// Finest-scale gradient estimate `(x_h, x_v)`.
    pub gradients: [Array2<f64>; 2],
    pub kernel: KernelField,
    /// Rows of every scale; `k` counts sweeps across scales.
    pub trace: IterateTrace,
    /// Index of the first trace row of each scale.
    pub scale_starts: Vec<usize>,
    pub levels: Vec<ScaleLevel>,
}

/// `(scale, sweep, block, [x, b])` after every block update.
pub type BlindObserver<'a> = &'a mut dyn FnMut(usize, usize, usize, &[Array1<f64>]);

/// Estimates the blur kernel of `y`.
///
/// `denoiser` acts on each gradient channel as `A_{g_x}`; the data module
/// is [`af_blind`] and the kernel module is [`KernelEstimateModule`].
pub fn solve_blind(y: &ImageField, denoiser: Option<Arc<dyn Denoiser>>, opts: &BlindOptions) -> Result<BlindOutput> {
    solve_blind_observed(y, denoiser, opts, &mut |_, _, _, _| {})
}

pub fn solve_blind_observed(
    y: &ImageField,
    denoiser: Option<Arc<dyn Denoiser>>,
    opts: &BlindOptions,
    observer: BlindObserver<'_>,
) -> Result<BlindOutput> {
    opts.validate()?;
    if opts.kernel_size > y.height() || opts.kernel_size > y.width() {
        return Err(FimaError::InvalidArgument(format!(
            "kernel size {} exceeds image {}x{}",
            opts.kernel_size,
            y.height(),
            y.width()
        )));
    }
    let levels = pyramid(y.height(), y.width(), opts.kernel_size, opts.scales);
    let mut kernel = KernelField::gaussian(levels[0].kernel_size, opts.init_sigma)?.project()?;
    let mut trace = IterateTrace::default();
    let mut scale_starts = Vec::with_capacity(levels.len());
    let mut sweep_offset = 0;
    let mut gradients = None;

    for (s, level) in levels.iter().enumerate() {
        let ys = resize_bicubic(y.pixels(), level.height, level.width);
        if kernel.height() != level.kernel_size {
            kernel = resize_kernel(&kernel, level.kernel_size)?;
        }
        let data = Arc::new(GradientData::from_gradients(
            image_gradients(&ys),
            (level.kernel_size, level.kernel_size),
        )?);
        let problem = BlockProblem::new(
            Arc::new(BlindCoupling::new(data.clone())),
            vec![Arc::new(ScalarPenalty::l0(opts.lambda_x)), Arc::new(ScalarPenalty::simplex())],
        );
        let modules = if opts.use_modules {
            let a_gx: Arc<dyn BlockModule> = match &denoiser {
                Some(d) => Arc::new(GradientBlockModule {
                    inner: Arc::new(DenoiserModule::new(d.clone(), level.height, level.width).with_channels(2)),
                }),
                None => Arc::new(crate::solvers::PassThrough),
            };
            BlockModules {
                a_f: Arc::new(BlindDataModule { data: data.clone(), tau_x: opts.tau_x, tau_b: opts.tau_b }),
                a_g: vec![
                    a_gx,
                    Arc::new(KernelEstimateModule {
                        data: data.clone(),
                        lambda_b: opts.lambda_b,
                        edge_threshold: opts.edge_threshold,
                    }),
                ],
            }
        } else {
            BlockModules::identity(2)
        };
        let mut cfg = MfimaConfig::uniform(2, opts.sweeps_per_scale, opts.tol);
        cfg.blocks[1] = StepRules { mu: PenaltyRule::TimesInverseStep(opts.mu_factor_b), ..StepRules::default() };

        let state0 = BlockState::new(vec![GradientData::stack(data.gradients()), kernel.to_vector()]);
        let (state, part) = solve_mfima_observed(&problem, &modules, &state0, &cfg, &mut |k, n, blocks| {
            observer(s, k, n, blocks)
        })?;

        scale_starts.push(trace.len());
        let sweeps = part.records.last().map(|r| r.row.k + 1).unwrap_or(0);
        for mut rec in part.records {
            rec.row.k += sweep_offset;
            trace.records.push(rec);
        }
        sweep_offset += sweeps;
        trace.stop = part.stop.or(Some(StopReason::MaxIters));
        kernel = KernelField::from_vector(level.kernel_size, level.kernel_size, &state.blocks[1])?;
        gradients = Some(data.channels(&state.blocks[0]));
    }

    Ok(BlindOutput {
        gradients: gradients.expect("at least one scale"),
        kernel,
        trace,
        scale_starts,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deconv::fft::convolve_circular;
    use crate::rng::CounterRng;

    fn textured(h: usize, w: usize, seed: u64) -> ImageField {
        let mut rng = CounterRng::new(seed);
        ImageField::new(Array2::from_shape_fn((h, w), |_| rng.uniform())).unwrap()
    }

    #[test]
    fn gradients_sum_to_zero() {
        let img = textured(9, 11, 1);
        let [gh, gv] = image_gradients(img.pixels());
        assert!(gh.sum().abs() < 1e-12 && gv.sum().abs() < 1e-12);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = ndarray::array![[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let rhs = ndarray::array![1.0, 2.0, 3.0];
        let sol = conjugate_gradient(|v| a.dot(v), &rhs, &Array1::zeros(3), 1e-12, 50).unwrap();
        assert!((a.dot(&sol.x) - &rhs).iter().all(|r| r.abs() < 1e-10));
        assert!(conjugate_gradient(|v| a.dot(v), &rhs, &Array1::zeros(3), 1e-12, 1).is_err());
    }

    #[test]
    fn kernel_recovered_from_sharp_gradients() {
        let z = textured(24, 24, 2);
        let b_true = KernelField::gaussian(5, 1.0).unwrap();
        let y = convolve_circular(&z, &b_true).unwrap();
        let data = GradientData::new(&y, (5, 5)).unwrap();
        let x = GradientData::stack(&image_gradients(z.pixels()));
        let b = estimate_kernel_cg(&x, &data, 1e-9).unwrap();
        let err = (&b.to_vector() - &b_true.to_vector()).mapv(|v| v * v).sum().sqrt();
        assert!(err <= 1e-3, "{err}");
        assert!(kernel_residual(&b.to_vector(), &x, &data, 1e-9) <= 1e-6);

        let zero = estimate_kernel_cg(&Array1::zeros(x.len()), &data, 2.0).unwrap();
        assert!(zero.taps().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn af_blind_fixed_point() {
        let z = textured(16, 16, 3);
        let b_true = KernelField::gaussian(3, 0.7).unwrap();
        let y = convolve_circular(&z, &b_true).unwrap();
        let data = GradientData::new(&y, (3, 3)).unwrap();
        let x = GradientData::stack(&image_gradients(z.pixels()));
        let (xo, bo) = af_blind(&x, &b_true.to_vector(), &data, 1e-3, 1.0).unwrap();
        assert!((&xo - &x).iter().all(|d| d.abs() < 1e-6));
        assert!((&bo - &b_true.to_vector()).iter().all(|d| d.abs() < 1e-6));

        let other = textured(16, 16, 4);
        let x_in = GradientData::stack(&image_gradients(other.pixels()));
        let x_out = solve_gradient_subproblem(&x_in, &b_true.to_vector(), &data, 1e-3);
        assert!(gradient_subproblem_residual(&x_out, &x_in, &b_true.to_vector(), &data, 1e-3) <= 1e-6);

        let (xo, bo) = af_blind(&x_in, &b_true.to_vector(), &data, 1e12, 1e12).unwrap();
        assert!((&xo - &x_in).iter().all(|d| d.abs() < 1e-6));
        assert!((&bo - &b_true.to_vector()).iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn pyramid_levels() {
        let p = pyramid(64, 64, 11, 3);
        assert_eq!(p.len(), 3);
        assert_eq!(p[2], ScaleLevel { height: 64, width: 64, kernel_size: 11 });
        assert_eq!(p[0].height, 36);
        assert!(p.iter().all(|l| l.kernel_size % 2 == 1));
    }
}
