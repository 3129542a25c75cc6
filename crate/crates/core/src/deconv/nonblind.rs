//! Sparse-coding deconvolution `min_x |y - B W^T x|^2 + g(x)`.

use std::sync::Arc;

use ndarray::{Array1, Array2, Zip};
use rustfft::num_complex::Complex64;

use super::fft::CircularConvolution;
use super::field::{ImageField, KernelField};
use super::wavelet::HaarWavelet;
use crate::error::{FimaError, Result};
use crate::modules::{module_identity, Denoiser, DenoiserModule, FnModule, Identity, ModuleFault, ModulePair};
use crate::problem::{CompositeProblem, LeastSquares, LinearOperator};
use crate::prox::{PenaltyKind, ScalarPenalty};
use crate::solvers::{solve_baseline, solve_efima, solve_ifima, BaselineVariant, Scheme, SolverConfig};
use crate::trace::IterateTrace;

/// `D = B W^T` acting on row-major coefficient vectors.
#[derive(Clone)]
pub struct DeblurOperator {
    conv: CircularConvolution,
    wavelet: HaarWavelet,
}

impl DeblurOperator {
    pub fn new(kernel: &KernelField, wavelet: HaarWavelet) -> Result<Self> {
        let (h, w) = wavelet.dim();
        Ok(Self { conv: CircularConvolution::new(kernel, h, w)?, wavelet })
    }

    pub fn conv(&self) -> &CircularConvolution {
        &self.conv
    }

    pub fn wavelet(&self) -> &HaarWavelet {
        &self.wavelet
    }

    /// `|D|^2 = max |K|^2` since `W` is orthogonal.
    pub fn spectral_norm_sq(&self) -> f64 {
        self.conv.spectral_norm_sq()
    }

    fn grid(&self, v: &Array1<f64>) -> Array2<f64> {
        Array2::from_shape_vec(self.wavelet.dim(), v.to_vec()).expect("operator dimension")
    }
}

impl LinearOperator for DeblurOperator {
    fn input_dim(&self) -> usize {
        let (h, w) = self.wavelet.dim();
        h * w
    }

    fn output_dim(&self) -> usize {
        self.input_dim()
    }

    fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        let z = self.wavelet.wavelet_inverse(&self.grid(x));
        Array1::from_iter(self.conv.apply(&z))
    }

    fn adjoint(&self, r: &Array1<f64>) -> Array1<f64> {
        let z = self.conv.adjoint(&self.grid(r));
        Array1::from_iter(self.wavelet.wavelet_forward(&z))
    }
}

/// Exact regularized normal-equation solve
/// `z* = (B^T B + tau I)^{-1} (B^T y + tau W^T x)`, returned as `W z*`.
pub fn af_nonblind(
    x: &Array2<f64>,
    y: &ImageField,
    conv: &CircularConvolution,
    tau: f64,
    wavelet: &HaarWavelet,
) -> Result<Array2<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(FimaError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if x.dim() != y.dim() || wavelet.dim() != y.dim() || conv.fft().dim() != y.dim() {
        return Err(FimaError::DimensionMismatch { expected: y.height() * y.width(), got: x.len() });
    }
    let fft = conv.fft();
    let ys = fft.forward(y.pixels());
    let zs = fft.forward(&wavelet.wavelet_inverse(x));
    let mut sol = Array2::<Complex64>::zeros(ys.dim());
    Zip::from(&mut sol).and(&ys).and(&zs).and(conv.otf()).for_each(|s, yv, zv, k| {
        *s = (k.conj() * yv + zv * tau) / (k.norm_sqr() + tau);
    });
    Ok(wavelet.wavelet_forward(&fft.inverse_real(&sol)))
}

/// `|(B^T B + tau I) z - (B^T y + tau W^T x)| / |B^T y + tau W^T x|` for the
/// image `z = W^T x'` of an [`af_nonblind`] output `x'`.
pub fn normal_equation_residual(
    x_out: &Array2<f64>,
    x_in: &Array2<f64>,
    y: &ImageField,
    conv: &CircularConvolution,
    tau: f64,
    wavelet: &HaarWavelet,
) -> f64 {
    let z = wavelet.wavelet_inverse(x_out);
    let lhs = conv.adjoint(&conv.apply(&z)) + &z * tau;
    let rhs = conv.adjoint(y.pixels()) + wavelet.wavelet_inverse(x_in) * tau;
    let num = (&lhs - &rhs).mapv(|v| v * v).sum().sqrt();
    let den = rhs.mapv(|v| v * v).sum().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Settings for [`solve_nonblind`].
#[derive(Debug, Clone, PartialEq)]
pub struct NonblindOptions {
    pub penalty: PenaltyKind,
    pub lambda: f64,
    /// Proximal weight of the data module.
    pub tau: f64,
    pub max_levels: usize,
    pub solver: SolverConfig,
}

impl Default for NonblindOptions {
    fn default() -> Self {
        Self { penalty: PenaltyKind::L0, lambda: 1e-4, tau: 1e-3, max_levels: 3, solver: SolverConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct NonblindOutput {
    pub image: ImageField,
    pub coefficients: Array1<f64>,
    pub trace: IterateTrace,
}

/// The sparse-coding problem for `y` and `kernel`, with its wavelet.
pub fn nonblind_problem(
    y: &ImageField,
    kernel: &KernelField,
    penalty: PenaltyKind,
    lambda: f64,
    max_levels: usize,
) -> Result<(CompositeProblem, Arc<DeblurOperator>)> {
    if !matches!(penalty, PenaltyKind::L1 | PenaltyKind::L0 | PenaltyKind::LpHalf) {
        return Err(FimaError::Unsupported(format!("penalty `{}` for non-blind deconvolution", penalty.name())));
    }
    let wavelet = HaarWavelet::fit(y.height(), y.width(), max_levels)?;
    let op = Arc::new(DeblurOperator::new(kernel, wavelet)?);
    let lip = 2.0 * op.spectral_norm_sq();
    let smooth = LeastSquares::new(op.clone(), y.to_vector())?.with_lipschitz(lip);
    let problem = CompositeProblem::with_lipschitz(Arc::new(smooth), Arc::new(ScalarPenalty::new(penalty, lambda)?), lip)?;
    Ok((problem, op))
}

/// Which modules drive the non-blind iteration.
#[derive(Clone)]
pub enum ModuleChoice {
    /// Both maps are the identity.
    Identity,
    /// `A_f` = [`af_nonblind`], `A_g` = identity.
    Data,
    /// `A_f` = [`af_nonblind`], `A_g` = the denoiser applied to `W^T x`.
    Denoiser(Arc<dyn Denoiser>),
}

impl std::fmt::Debug for ModuleChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModuleChoice::Identity => f.write_str("Identity"),
            ModuleChoice::Data => f.write_str("Data"),
            ModuleChoice::Denoiser(d) => write!(f, "Denoiser({})", d.label()),
        }
    }
}

/// Builds the module pair for `choice` on the problem behind `op`.
pub fn nonblind_modules(y: &ImageField, op: &DeblurOperator, tau: f64, choice: &ModuleChoice) -> Result<ModulePair> {
    if let ModuleChoice::Identity = choice {
        return Ok(module_identity());
    }
    if !(tau > 0.0) {
        return Err(FimaError::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    let (h, w) = y.dim();
    let y_owned = y.clone();
    let conv = op.conv().clone();
    let wavelet = *op.wavelet();
    let a_f = FnModule::new(format!("af_tau={tau:e}"), move |x: &Array1<f64>| {
        let grid = Array2::from_shape_vec((h, w), x.to_vec()).map_err(|e| ModuleFault::Fatal(e.to_string()))?;
        let out = af_nonblind(&grid, &y_owned, &conv, tau, &wavelet).map_err(|e| ModuleFault::Fatal(e.to_string()))?;
        Ok(Array1::from_iter(out))
    });
    Ok(match choice {
        ModuleChoice::Denoiser(d) => {
            ModulePair::new(Arc::new(a_f), Arc::new(DenoiserModule::new(d.clone(), h, w).through(Arc::new(wavelet))))
                .with_label(d.label())
        }
        _ => ModulePair::new(Arc::new(a_f), Arc::new(Identity)).with_label("af"),
    })
}

/// Deblurs `y` with a known kernel. The iteration starts from `W y`;
/// `modules` is ignored by the baselines.
pub fn solve_nonblind(
    y: &ImageField,
    kernel: &KernelField,
    scheme: Scheme,
    modules: &ModuleChoice,
    opts: &NonblindOptions,
) -> Result<NonblindOutput> {
    let (problem, op) = nonblind_problem(y, kernel, opts.penalty, opts.lambda, opts.max_levels)?;
    let x0 = Array1::from_iter(op.wavelet().wavelet_forward(y.pixels()));
    let (x, trace) = match scheme {
        Scheme::Pg => solve_baseline(&problem, &x0, &opts.solver, &BaselineVariant::Pg)?,
        Scheme::Apg => solve_baseline(&problem, &x0, &opts.solver, &BaselineVariant::Apg)?,
        Scheme::Efima => solve_efima(&problem, &nonblind_modules(y, &op, opts.tau, modules)?, &x0, &opts.solver)?,
        Scheme::Ifima => solve_ifima(&problem, &nonblind_modules(y, &op, opts.tau, modules)?, &x0, &opts.solver)?,
    };
    let grid = Array2::from_shape_vec(y.dim(), x.to_vec()).expect("coefficient dimension");
    let image = ImageField::new(op.wavelet().wavelet_inverse(&grid))?;
    Ok(NonblindOutput { image, coefficients: x, trace })
}
