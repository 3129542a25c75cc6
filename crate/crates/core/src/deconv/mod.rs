//! Non-blind and blind image deconvolution with periodic boundaries.

pub mod blind;
pub mod fft;
pub mod field;
pub mod io;
pub mod nonblind;
pub mod resize;
pub mod synthetic;
pub mod wavelet;

pub use blind::{
    af_blind, estimate_kernel_cg, image_gradients, solve_blind, solve_blind_observed, BlindOptions, BlindOutput,
    GradientData,
};
pub use fft::{convolve_circular, convolve_circular_direct, CircularConvolution};
pub use field::{ImageField, KernelField};
pub use nonblind::{af_nonblind, solve_nonblind, ModuleChoice, NonblindOptions, NonblindOutput};
pub use synthetic::{make_synthetic, KernelKind, SyntheticInstance};
pub use wavelet::HaarWavelet;
