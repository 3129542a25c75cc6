//! Proximal operators, the simplex projection and the quadratic upper model.
//!
//! Every operator here is the exact global minimizer of
//! `theta * h(x) + 0.5 * (x - v)^2` taken componentwise, or the Euclidean
//! projection for the simplex indicator.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, FimaError, Result};
use crate::problem::{NonsmoothTerm, SmoothTerm};

/// Which nonsmooth penalty a [`ScalarPenalty`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PenaltyKind {
    L1,
    L0,
    /// `|x|^(1/2)`, the only fractional exponent with a closed-form prox.
    LpHalf,
    SimplexIndicator,
    Zero,
}

impl PenaltyKind {
    pub fn name(self) -> &'static str {
        match self {
            PenaltyKind::L1 => "l1",
            PenaltyKind::L0 => "l0",
            PenaltyKind::LpHalf => "lp_half",
            PenaltyKind::SimplexIndicator => "simplex",
            PenaltyKind::Zero => "zero",
        }
    }

    /// Parses a penalty name. `lp` with an exponent other than 0.5 is rejected.
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l1" => Ok(PenaltyKind::L1),
            "l0" => Ok(PenaltyKind::L0),
            "lp_half" | "lphalf" | "l1/2" | "lp0.5" => Ok(PenaltyKind::LpHalf),
            "simplex" => Ok(PenaltyKind::SimplexIndicator),
            "zero" | "none" => Ok(PenaltyKind::Zero),
            other if other.starts_with("lp") => Err(FimaError::Unsupported(format!(
                "fractional penalty `{other}`: only p = 1/2 is implemented"
            ))),
            other => Err(FimaError::Parse(format!("unknown penalty `{other}`"))),
        }
    }
}

/// A separable penalty `weight * h(x)` (or a weightless indicator).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarPenalty {
    pub kind: PenaltyKind,
    pub weight: f64,
}

impl ScalarPenalty {
    pub fn new(kind: PenaltyKind, weight: f64) -> Result<Self> {
        if !(weight >= 0.0 && weight.is_finite()) {
            return Err(FimaError::InvalidArgument(format!(
                "penalty weight must be finite and nonnegative, got {weight}"
            )));
        }
        Ok(Self { kind, weight })
    }

    pub fn l1(weight: f64) -> Self {
        Self::new(PenaltyKind::L1, weight).expect("valid l1 weight")
    }

    pub fn l0(weight: f64) -> Self {
        Self::new(PenaltyKind::L0, weight).expect("valid l0 weight")
    }

    pub fn lp_half(weight: f64) -> Self {
        Self::new(PenaltyKind::LpHalf, weight).expect("valid lp weight")
    }

    pub fn simplex() -> Self {
        Self { kind: PenaltyKind::SimplexIndicator, weight: 0.0 }
    }

    pub fn zero() -> Self {
        Self { kind: PenaltyKind::Zero, weight: 0.0 }
    }

    fn effective_weight(&self) -> f64 {
        match self.kind {
            PenaltyKind::SimplexIndicator | PenaltyKind::Zero => 0.0,
            _ => self.weight,
        }
    }
}

impl NonsmoothTerm for ScalarPenalty {
    fn value(&self, x: &Array1<f64>) -> f64 {
        let w = self.effective_weight();
        match self.kind {
            PenaltyKind::Zero => 0.0,
            PenaltyKind::L1 => w * x.iter().map(|v| v.abs()).sum::<f64>(),
            PenaltyKind::L0 => w * x.iter().filter(|v| **v != 0.0).count() as f64,
            PenaltyKind::LpHalf => w * x.iter().map(|v| v.abs().sqrt()).sum::<f64>(),
            PenaltyKind::SimplexIndicator => {
                if on_simplex(x) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn prox(&self, v: &Array1<f64>, gamma: f64) -> Result<Array1<f64>> {
        if !(gamma > 0.0) {
            return Err(FimaError::InvalidArgument(format!("prox step must be positive, got {gamma}")));
        }
        let theta = gamma * self.effective_weight();
        match self.kind {
            PenaltyKind::SimplexIndicator => project_simplex(v),
            PenaltyKind::Zero => {
                ensure_finite(v.iter(), "prox input")?;
                Ok(v.clone())
            }
            _ if theta == 0.0 => {
                ensure_finite(v.iter(), "prox input")?;
                Ok(v.clone())
            }
            PenaltyKind::L1 => prox_l1(v, theta),
            PenaltyKind::L0 => prox_l0(v, theta),
            PenaltyKind::LpHalf => prox_lp_half(v, theta),
        }
    }

    fn label(&self) -> String {
        format!("{}({})", self.kind.name(), self.weight)
    }
}

fn check_prox_args(v: &Array1<f64>, theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(FimaError::InvalidArgument(format!("theta must be positive, got {theta}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FimaError::InvalidArgument("prox input contains non-finite values".into()));
    }
    Ok(())
}

/// Soft thresholding.
pub fn prox_l1(v: &Array1<f64>, theta: f64) -> Result<Array1<f64>> {
    check_prox_args(v, theta)?;
    Ok(v.mapv(|x| x.signum() * (x.abs() - theta).max(0.0)))
}

/// Hard thresholding: keeps `v_i` iff `v_i^2 > 2 theta`. Ties go to zero.
pub fn prox_l0(v: &Array1<f64>, theta: f64) -> Result<Array1<f64>> {
    check_prox_args(v, theta)?;
    let thresh = 2.0 * theta;
    Ok(v.mapv(|x| if x * x > thresh { x } else { 0.0 }))
}

/// Half thresholding, the global minimizer of `theta |x|^(1/2) + 0.5 (x - v)^2`.
pub fn prox_lp_half(v: &Array1<f64>, theta: f64) -> Result<Array1<f64>> {
    check_prox_args(v, theta)?;
    Ok(v.mapv(|x| half_threshold(x, theta)))
}

fn half_threshold(v: f64, theta: f64) -> f64 {
    // Cardano form for (x - v)^2 + lam |x|^(1/2) with lam = 2 theta.
    let lam = 2.0 * theta;
    let a = v.abs();
    let thresh = 54f64.cbrt() / 4.0 * lam.powf(2.0 / 3.0);
    if a <= thresh {
        return 0.0;
    }
    let arg = (lam / 8.0) * (a / 3.0).powf(-1.5);
    let phi = arg.clamp(-1.0, 1.0).acos();
    let x = 2.0 / 3.0 * a * (1.0 + (2.0 * std::f64::consts::PI / 3.0 - 2.0 * phi / 3.0).cos());
    // The closed form is exact above the threshold; the comparison settles
    // rounding at the boundary in favour of zero.
    let at_x = theta * x.sqrt() + 0.5 * (x - a) * (x - a);
    let at_zero = 0.5 * a * a;
    if at_x < at_zero {
        x.copysign(v)
    } else {
        0.0
    }
}

const SIMPLEX_SUM_TOL: f64 = 1e-12;

fn on_simplex(x: &Array1<f64>) -> bool {
    !x.is_empty() && x.iter().all(|v| *v >= 0.0) && (x.sum() - 1.0).abs() <= SIMPLEX_SUM_TOL
}

fn tie(u: f64) -> f64 {
    4.0 * f64::EPSILON * (1.0 + u.abs())
}

/// Euclidean projection onto `{b : b_i >= 0, sum b_i = 1}` by sort-and-shift.
///
/// Members of the simplex are returned unchanged, so the map is idempotent
/// bit-for-bit.
pub fn project_simplex(v: &Array1<f64>) -> Result<Array1<f64>> {
    if v.is_empty() {
        return Err(FimaError::InvalidArgument("cannot project an empty vector onto the simplex".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FimaError::InvalidArgument("simplex input contains non-finite values".into()));
    }
    if on_simplex(v) {
        return Ok(v.clone());
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut shift = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if u - t > tie(u) {
            shift = t;
        }
    }
    // entries tied with the threshold up to rounding are dropped
    let mut out = v.mapv(|x| if x - shift > tie(x) { x - shift } else { 0.0 });
    let total = out.sum();
    if (total - 1.0).abs() > 0.0 && total > 0.0 {
        out.mapv_inplace(|x| x / total);
    }
    Ok(out)
}

/// `f(v) + <grad f(v), x - v> + |x - v|^2 / (2 gamma)`.
pub fn quadratic_model(f: &dyn SmoothTerm, v: &Array1<f64>, x: &Array1<f64>, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(FimaError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if v.len() != x.len() {
        return Err(FimaError::DimensionMismatch { expected: v.len(), got: x.len() });
    }
    let diff = x - v;
    let grad = f.gradient(v);
    Ok(f.value(v) + grad.dot(&diff) + diff.dot(&diff) / (2.0 * gamma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn l1_examples() {
        assert_eq!(prox_l1(&array![3.0], 1.0).unwrap(), array![2.0]);
        assert_eq!(prox_l1(&array![0.0, 0.0], 0.5).unwrap(), array![0.0, 0.0]);
        assert_eq!(prox_l1(&array![-0.3], 0.5).unwrap(), array![0.0]);
    }

    #[test]
    fn l0_examples_and_tie() {
        assert_eq!(prox_l0(&array![2.0], 1.0).unwrap(), array![2.0]);
        assert_eq!(prox_l0(&array![1.0], 1.0).unwrap(), array![0.0]);
        assert_eq!(prox_l0(&array![0.0], 1.0).unwrap(), array![0.0]);
        // v^2 == 2 theta
        assert_eq!(prox_l0(&array![2.0], 2.0).unwrap(), array![0.0]);
    }

    #[test]
    fn half_examples() {
        assert_eq!(prox_lp_half(&array![0.0], 1.0).unwrap(), array![0.0]);
        assert_eq!(prox_lp_half(&array![0.01], 1.0).unwrap(), array![0.0]);
        let x = prox_lp_half(&array![-5.0], 0.1).unwrap()[0];
        assert!(x < -4.9 && x > -5.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(prox_l1(&array![f64::NAN], 1.0).is_err());
        assert!(prox_l0(&array![1.0], 0.0).is_err());
        assert!(project_simplex(&Array1::zeros(0)).is_err());
        assert!(PenaltyKind::parse("lp0.3").is_err());
        assert!(ScalarPenalty::new(PenaltyKind::L1, -1.0).is_err());
    }

    #[test]
    fn simplex_examples() {
        assert_eq!(project_simplex(&array![0.3, 0.7]).unwrap(), array![0.3, 0.7]);
        assert_eq!(project_simplex(&array![1.2, 0.2]).unwrap(), array![1.0, 0.0]);
        assert_eq!(project_simplex(&array![0.5]).unwrap(), array![1.0]);
    }

    #[test]
    fn simplex_indicator_value() {
        let g = ScalarPenalty::simplex();
        assert_eq!(g.value(&array![0.25, 0.75]), 0.0);
        assert!(g.value(&array![0.5, 0.6]).is_infinite());
        assert!(g.value(&array![-0.5, 1.5]).is_infinite());
    }
}
