//! The composite objective `Psi = f + g`.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::error::{FimaError, Result};
use crate::rng::CounterRng;

/// Smooth (Lipschitz-gradient) part `f`.
pub trait SmoothTerm: Send + Sync {
    fn value(&self, x: &Array1<f64>) -> f64;
    fn gradient(&self, x: &Array1<f64>) -> Array1<f64>;

    /// A known gradient Lipschitz constant, if the term can supply one.
    fn lipschitz(&self) -> Option<f64> {
        None
    }

    /// `Some(D)` when `f(x) = |y - D x|^2`; lets the constant be computed
    /// by power iteration instead of sampling.
    fn least_squares_operator(&self) -> Option<&dyn LinearOperator> {
        None
    }
}

/// Nonsmooth, proximable part `g`. `value` may be `+inf` outside an indicator set.
pub trait NonsmoothTerm: Send + Sync {
    fn value(&self, x: &Array1<f64>) -> f64;
    /// `prox_{gamma g}(v)`.
    fn prox(&self, v: &Array1<f64>, gamma: f64) -> Result<Array1<f64>>;
    fn label(&self) -> String {
        "g".to_string()
    }
}

/// A real linear map with its adjoint.
pub trait LinearOperator: Send + Sync {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn apply(&self, x: &Array1<f64>) -> Array1<f64>;
    fn adjoint(&self, r: &Array1<f64>) -> Array1<f64>;
}

/// Dense matrix operator.
#[derive(Debug, Clone)]
pub struct MatrixOperator(pub Array2<f64>);

impl LinearOperator for MatrixOperator {
    fn input_dim(&self) -> usize {
        self.0.ncols()
    }
    fn output_dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        self.0.dot(x)
    }
    fn adjoint(&self, r: &Array1<f64>) -> Array1<f64> {
        self.0.t().dot(r)
    }
}

/// `f(x) = |y - D x|^2`.
pub struct LeastSquares {
    op: Arc<dyn LinearOperator>,
    y: Array1<f64>,
    lipschitz: Option<f64>,
}

impl LeastSquares {
    pub fn new(op: Arc<dyn LinearOperator>, y: Array1<f64>) -> Result<Self> {
        if op.output_dim() != y.len() {
            return Err(FimaError::DimensionMismatch { expected: op.output_dim(), got: y.len() });
        }
        Ok(Self { op, y, lipschitz: None })
    }

    /// Attaches an exact Lipschitz constant (e.g. from a known spectrum).
    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    pub fn observation(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn residual(&self, x: &Array1<f64>) -> Array1<f64> {
        self.op.apply(x) - &self.y
    }
}

impl SmoothTerm for LeastSquares {
    fn value(&self, x: &Array1<f64>) -> f64 {
        let r = self.residual(x);
        r.dot(&r)
    }

    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        self.op.adjoint(&self.residual(x)) * 2.0
    }

    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    fn least_squares_operator(&self) -> Option<&dyn LinearOperator> {
        Some(self.op.as_ref())
    }
}

type ValueFn = Box<dyn Fn(&Array1<f64>) -> f64 + Send + Sync>;
type GradFn = Box<dyn Fn(&Array1<f64>) -> Array1<f64> + Send + Sync>;

/// A smooth term given by closures.
pub struct FnSmooth {
    value: ValueFn,
    gradient: GradFn,
    lipschitz: Option<f64>,
}

impl FnSmooth {
    pub fn new(
        value: impl Fn(&Array1<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Array1<f64>) -> Array1<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { value: Box::new(value), gradient: Box::new(gradient), lipschitz: None }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }

    /// `0.5 |x - center|^2`.
    pub fn half_squared_distance(center: Array1<f64>) -> Self {
        let c2 = center.clone();
        Self::new(
            move |x| {
                let d = x - &center;
                0.5 * d.dot(&d)
            },
            move |x| x - &c2,
        )
    }

    /// The zero function.
    pub fn zero() -> Self {
        Self::new(|_| 0.0, |x| Array1::zeros(x.len())).with_lipschitz(0.0)
    }
}

impl SmoothTerm for FnSmooth {
    fn value(&self, x: &Array1<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &Array1<f64>) -> Array1<f64> {
        (self.gradient)(x)
    }
    fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// `Psi = f + g` together with the gradient Lipschitz constant of `f`.
#[derive(Clone)]
pub struct CompositeProblem {
    pub smooth: Arc<dyn SmoothTerm>,
    pub nonsmooth: Arc<dyn NonsmoothTerm>,
    lipschitz: f64,
}

impl fmt::Debug for CompositeProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CompositeProblem")
            .field("nonsmooth", &self.nonsmooth.label())
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl CompositeProblem {
    /// Builds the problem, estimating `L` at `probe` when `f` does not supply it.
    pub fn new(smooth: Arc<dyn SmoothTerm>, nonsmooth: Arc<dyn NonsmoothTerm>, probe: &Array1<f64>) -> Result<Self> {
        #[cfg(debug_assertions)]
        check_gradient(smooth.as_ref(), probe, 1e-5)?;
        let lipschitz = match smooth.lipschitz() {
            Some(l) => l,
            None => estimate_lipschitz(smooth.as_ref(), probe)?,
        };
        Self::with_lipschitz(smooth, nonsmooth, lipschitz)
    }

    pub fn with_lipschitz(smooth: Arc<dyn SmoothTerm>, nonsmooth: Arc<dyn NonsmoothTerm>, lipschitz: f64) -> Result<Self> {
        if !(lipschitz >= 0.0 && lipschitz.is_finite()) {
            return Err(FimaError::InvalidArgument(format!("lipschitz constant must be finite, got {lipschitz}")));
        }
        Ok(Self { smooth, nonsmooth, lipschitz })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    /// `f(x) + g(x)`; `+inf` when `x` leaves the domain of `g`.
    pub fn objective(&self, x: &Array1<f64>) -> f64 {
        let g = self.nonsmooth.value(x);
        if g == f64::INFINITY {
            return f64::INFINITY;
        }
        self.smooth.value(x) + g
    }

    /// `prox_{gamma g}(v - gamma grad f(v))`.
    pub fn prox_gradient_step(&self, v: &Array1<f64>, gamma: f64) -> Result<Array1<f64>> {
        prox_gradient_step(self, v, gamma)
    }
}

pub fn objective(problem: &CompositeProblem, x: &Array1<f64>) -> f64 {
    problem.objective(x)
}

/// One forward-backward step.
pub fn prox_gradient_step(problem: &CompositeProblem, v: &Array1<f64>, gamma: f64) -> Result<Array1<f64>> {
    if !(gamma > 0.0) {
        return Err(FimaError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let grad = problem.smooth.gradient(v);
    let forward = v - &(grad * gamma);
    problem.nonsmooth.prox(&forward, gamma)
}

const POWER_ITER_MAX: usize = 10_000;
const POWER_ITER_RTOL: f64 = 1e-6;
const FD_PAIRS: usize = 100;
const FD_SAFETY: f64 = 1.5;

/// Estimates the gradient Lipschitz constant of `f`.
///
/// Least-squares terms get `2 sigma_max(D)^2` by power iteration on `D^T D`.
/// Anything else is sampled over random pairs around `probe` and inflated
/// by a safety factor.
pub fn estimate_lipschitz(smooth: &dyn SmoothTerm, probe: &Array1<f64>) -> Result<f64> {
    let mut rng = CounterRng::new(0x5eed_0f11);
    if let Some(op) = smooth.least_squares_operator() {
        let n = op.input_dim();
        let mut v = Array1::from(rng.normal_vec(n));
        let norm = v.dot(&v).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        v /= norm;
        let mut eig = 0.0;
        for _ in 0..POWER_ITER_MAX {
            let w = op.adjoint(&op.apply(&v));
            let next = w.dot(&w).sqrt();
            if !next.is_finite() {
                break;
            }
            if next == 0.0 {
                return Ok(0.0);
            }
            v = w / next;
            if (next - eig).abs() <= POWER_ITER_RTOL * next {
                return Ok(2.0 * next);
            }
            eig = next;
        }
        return Err(FimaError::EstimationFailure(format!(
            "power iteration did not reach relative tolerance {POWER_ITER_RTOL} in {POWER_ITER_MAX} steps"
        )));
    }

    let n = probe.len();
    let mut best = 0.0f64;
    for _ in 0..FD_PAIRS {
        let a = probe + &Array1::from(rng.normal_vec(n));
        let b = probe + &Array1::from(rng.normal_vec(n));
        let dx = &a - &b;
        let dist = dx.dot(&dx).sqrt();
        if dist == 0.0 {
            continue;
        }
        let dg = smooth.gradient(&a) - smooth.gradient(&b);
        let ratio = dg.dot(&dg).sqrt() / dist;
        if !ratio.is_finite() {
            return Err(FimaError::EstimationFailure("non-finite gradient difference".into()));
        }
        best = best.max(ratio);
    }
    Ok(FD_SAFETY * best)
}

/// Directional central-difference check of `gradient` against `value` at
/// `x` along a few pseudo-random directions.
pub fn check_gradient(smooth: &dyn SmoothTerm, x: &Array1<f64>, rel_tol: f64) -> Result<()> {
    let mut rng = CounterRng::new(0x9ad1e5);
    let g = smooth.gradient(x);
    let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for _ in 0..3 {
        let mut d = Array1::from(rng.normal_vec(x.len()));
        let nd = d.dot(&d).sqrt();
        if nd == 0.0 {
            continue;
        }
        d /= nd;
        let h = 1e-6 * scale;
        let fp = smooth.value(&(x + &(&d * h)));
        let fm = smooth.value(&(x - &(&d * h)));
        let fd = (fp - fm) / (2.0 * h);
        let an = g.dot(&d);
        let denom = an.abs().max(fd.abs()).max(1e-8 * (1.0 + smooth.value(x).abs()));
        if (fd - an).abs() / denom > rel_tol.max(1e-4) && (fd - an).abs() > 1e-7 * (1.0 + smooth.value(x).abs()) {
            return Err(FimaError::InvalidArgument(format!(
                "gradient disagrees with finite differences: directional {an} vs {fd}"
            )));
        }
    }
    Ok(())
}

/// The practical sub-gradient certificate for the implicit-momentum test.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCertificate {
    pub d: Array1<f64>,
    pub norm_d: f64,
    /// `C |u_tilde - x_prev|`.
    pub rhs: f64,
    pub accepted: bool,
}

/// Computes `d = (mu - 1/gamma)(u_tilde - u) - (grad f(u) - grad f(u_tilde))`
/// and tests `|d| <= C |u_tilde - x_prev|`.
///
/// Only meaningful when `u_tilde` is the penalized prox step taken from `u`.
pub fn subdiff_error(
    smooth: &dyn SmoothTerm,
    u: &Array1<f64>,
    u_tilde: &Array1<f64>,
    x_prev: &Array1<f64>,
    mu: f64,
    gamma: f64,
    c: f64,
) -> Result<ErrorCertificate> {
    let grad_u = smooth.gradient(u);
    certificate_from_gradients(&grad_u, &smooth.gradient(u_tilde), u, u_tilde, x_prev, mu, gamma, c)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn certificate_from_gradients(
    grad_u: &Array1<f64>,
    grad_u_tilde: &Array1<f64>,
    u: &Array1<f64>,
    u_tilde: &Array1<f64>,
    x_prev: &Array1<f64>,
    mu: f64,
    gamma: f64,
    c: f64,
) -> Result<ErrorCertificate> {
    if !(mu > 0.0 && gamma > 0.0 && c > 0.0) {
        return Err(FimaError::InvalidArgument(format!(
            "certificate needs mu, gamma, C > 0 (got {mu}, {gamma}, {c})"
        )));
    }
    if u.len() != u_tilde.len() || u.len() != x_prev.len() {
        return Err(FimaError::DimensionMismatch { expected: u.len(), got: u_tilde.len().min(x_prev.len()) });
    }
    let d = (u_tilde - u) * (mu - 1.0 / gamma) - (grad_u - grad_u_tilde);
    let norm_d = d.dot(&d).sqrt();
    let step = u_tilde - x_prev;
    let rhs = c * step.dot(&step).sqrt();
    Ok(ErrorCertificate { d, norm_d, rhs, accepted: norm_d <= rhs })
}
