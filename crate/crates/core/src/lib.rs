//! Modular proximal iterations with convergence guards.
//!
//! A composite objective `Psi = f + g` is minimized by letting arbitrary
//! user modules (`A_f`, `A_g`) propose each iterate while a monitor keeps
//! the analytic proximal-gradient step as a safety net. See
//! [`solvers`] for the schemes, [`prox`] for the proximal toolbox,
//! [`modules`] for the plug-in operators and [`deconv`] for the
//! deconvolution applications.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod deconv;
pub mod error;
pub mod metrics;
pub mod modules;
pub mod problem;
pub mod prox;
pub mod rng;
pub mod solvers;
pub mod trace;

pub use error::{FimaError, Result};
pub use problem::{CompositeProblem, LinearOperator, NonsmoothTerm, SmoothTerm};
pub use prox::{PenaltyKind, ScalarPenalty};
pub use solvers::{Scheme, SolverConfig};
pub use trace::{IterateTrace, TraceRow};
