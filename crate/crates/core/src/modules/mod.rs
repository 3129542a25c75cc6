//! Pluggable computational modules `A_f` and `A_g`.
//!
//! The solvers only see [`Module`]: a map from the current point to a
//! proposal. Image denoisers implement [`Denoiser`] and are lifted to
//! modules with [`DenoiserModule`], optionally through an orthogonal
//! transform when the solver variable is a coefficient vector.

mod denoise;
mod external;

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};

use crate::problem::CompositeProblem;

pub use denoise::{total_variation, IdentityDenoiser, RecursiveFilter, TvDenoiser};
pub use external::ExternalDenoiser;

/// Why a module could not produce an output.
#[derive(Debug, Clone, PartialEq)]
pub enum ModuleFault {
    /// The iteration should fall back to the current iterate.
    Recoverable(String),
    /// Misuse (shape mismatch etc.); aborts the run.
    Fatal(String),
}

impl fmt::Display for ModuleFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModuleFault::Recoverable(m) => write!(f, "{m}"),
            ModuleFault::Fatal(m) => write!(f, "fatal: {m}"),
        }
    }
}

pub type ModuleResult = std::result::Result<Array1<f64>, ModuleFault>;

/// A user-specified operator on the solver variable.
pub trait Module: Send + Sync {
    fn label(&self) -> String;
    fn apply(&self, x: &Array1<f64>) -> ModuleResult;
}

/// `(A_f, A_g)`, applied as `A_g(A_f(x))`.
#[derive(Clone)]
pub struct ModulePair {
    pub a_f: Arc<dyn Module>,
    pub a_g: Arc<dyn Module>,
    pub label: String,
}

impl fmt::Debug for ModulePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModulePair")
            .field("a_f", &self.a_f.label())
            .field("a_g", &self.a_g.label())
            .field("label", &self.label)
            .finish()
    }
}

impl ModulePair {
    pub fn new(a_f: Arc<dyn Module>, a_g: Arc<dyn Module>) -> Self {
        let label = format!("{}+{}", a_f.label(), a_g.label());
        Self { a_f, a_g, label }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `A_g(A_f(x))`, reporting which stage failed.
    pub fn compose(&self, x: &Array1<f64>) -> Result<Array1<f64>, (String, ModuleFault)> {
        let mid = self.a_f.apply(x).map_err(|e| (self.a_f.label(), e))?;
        check_output(&self.a_f.label(), x.len(), &mid)?;
        let out = self.a_g.apply(&mid).map_err(|e| (self.a_g.label(), e))?;
        check_output(&self.a_g.label(), x.len(), &out)?;
        Ok(out)
    }
}

fn check_output(label: &str, dim: usize, out: &Array1<f64>) -> Result<(), (String, ModuleFault)> {
    if out.len() != dim {
        return Err((
            label.to_string(),
            ModuleFault::Fatal(format!("output has dimension {} instead of {dim}", out.len())),
        ));
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err((label.to_string(), ModuleFault::Fatal("non-finite output".into())));
    }
    Ok(())
}

/// A module from a closure.
pub struct FnModule<F> {
    label: String,
    f: F,
}

impl<F> FnModule<F>
where
    F: Fn(&Array1<f64>) -> ModuleResult + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self { label: label.into(), f }
    }
}

impl<F> Module for FnModule<F>
where
    F: Fn(&Array1<f64>) -> ModuleResult + Send + Sync,
{
    fn label(&self) -> String {
        self.label.clone()
    }
    fn apply(&self, x: &Array1<f64>) -> ModuleResult {
        (self.f)(x)
    }
}

pub struct Identity;

impl Module for Identity {
    fn label(&self) -> String {
        "identity".into()
    }
    fn apply(&self, x: &Array1<f64>) -> ModuleResult {
        Ok(x.clone())
    }
}

pub fn module_identity() -> ModulePair {
    ModulePair::new(Arc::new(Identity), Arc::new(Identity)).with_label("identity")
}

/// `A_f(x) = x - gamma grad f(x)`, `A_g(v) = prox_{gamma g}(v)`.
pub fn module_pg_step(problem: &CompositeProblem, gamma: f64) -> ModulePair {
    let smooth = problem.smooth.clone();
    let nonsmooth = problem.nonsmooth.clone();
    let a_f = FnModule::new("grad-step", move |x: &Array1<f64>| Ok(x - &(smooth.gradient(x) * gamma)));
    let a_g = FnModule::new("prox-step", move |v: &Array1<f64>| {
        nonsmooth.prox(v, gamma).map_err(|e| ModuleFault::Fatal(e.to_string()))
    });
    ModulePair::new(Arc::new(a_f), Arc::new(a_g)).with_label("pg")
}

/// An image-to-image operator usable as `A_g`.
pub trait Denoiser: Send + Sync {
    fn label(&self) -> String;
    fn denoise(&self, image: &Array2<f64>) -> Result<Array2<f64>, ModuleFault>;
}

/// Orthogonal change of variables between the solver vector and the image.
pub trait ImageTransform: Send + Sync {
    /// image -> coefficients
    fn forward(&self, image: &Array2<f64>) -> Array2<f64>;
    /// coefficients -> image
    fn inverse(&self, coeffs: &Array2<f64>) -> Array2<f64>;
}

/// Lifts a [`Denoiser`] to a [`Module`] on flattened row-major images
/// (or transform coefficients of them).
pub struct DenoiserModule {
    denoiser: Arc<dyn Denoiser>,
    height: usize,
    width: usize,
    channels: usize,
    transform: Option<Arc<dyn ImageTransform>>,
}

impl DenoiserModule {
    pub fn new(denoiser: Arc<dyn Denoiser>, height: usize, width: usize) -> Self {
        Self { denoiser, height, width, channels: 1, transform: None }
    }

    /// The vector is `channels` images stacked one after another; each is
    /// denoised independently.
    pub fn with_channels(mut self, channels: usize) -> Self {
        self.channels = channels.max(1);
        self
    }

    pub fn through(mut self, transform: Arc<dyn ImageTransform>) -> Self {
        self.transform = Some(transform);
        self
    }
}

impl Module for DenoiserModule {
    fn label(&self) -> String {
        self.denoiser.label()
    }

    fn apply(&self, x: &Array1<f64>) -> ModuleResult {
        let plane = self.height * self.width;
        if x.len() != plane * self.channels {
            return Err(ModuleFault::Fatal(format!(
                "expected {} values for {} channel(s) of {}x{}, got {}",
                plane * self.channels,
                self.channels,
                self.height,
                self.width,
                x.len()
            )));
        }
        let mut out = Vec::with_capacity(x.len());
        for c in 0..self.channels {
            let chunk = x.slice(ndarray::s![c * plane..(c + 1) * plane]).to_owned();
            let grid = chunk
                .into_shape_with_order((self.height, self.width))
                .map_err(|e| ModuleFault::Fatal(e.to_string()))?;
            let image = match &self.transform {
                Some(t) => t.inverse(&grid),
                None => grid,
            };
            let den = self.denoiser.denoise(&image)?;
            let back = match &self.transform {
                Some(t) => t.forward(&den),
                None => den,
            };
            out.extend(back.iter().copied());
        }
        Ok(Array1::from(out))
    }
}

pub fn module_tv_denoise(weight: f64, inner_iters: usize) -> TvDenoiser {
    TvDenoiser::new(weight, inner_iters)
}

pub fn module_recursive_filter(sigma: f64) -> RecursiveFilter {
    RecursiveFilter::new(sigma)
}

pub fn module_external_denoiser(command_template: &str) -> crate::error::Result<ExternalDenoiser> {
    ExternalDenoiser::new(command_template)
}
