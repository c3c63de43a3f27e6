//! Numerical laboratory for systems of second-order SPDEs driven by Gaussian
//! noise that is white in time and spatially homogeneous.
//!
//! The crate is organised bottom-up:
//!
//! * [`spectral`]: covariance kernels `f` and their spectral measures `μ`.
//! * [`green`]: heat and wave fundamental solutions, their Fourier
//!   multipliers and grid discretisations.
//! * [`hyp`]: the integral conditions on `Γ` and `μ` evaluated by quadrature,
//!   with scaling-exponent fits and a verdict report.
//! * [`noise`]: spectral synthesis of noise increments on a periodic grid.
//! * [`solver`]: exponential-Euler / spectral-leapfrog integration of the
//!   mild equation, single trajectories and Monte Carlo ensembles.
//! * [`analysis`]: density estimation, positivity checks, Hölder fits,
//!   the linear Gaussian oracle and the localization statistic.

pub mod analysis;
pub mod error;
pub mod fft;
pub mod green;
pub mod grid;
pub mod hyp;
pub mod noise;
pub mod quadrature;
pub mod rng;
pub mod solver;
pub mod special;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use green::{GreenFunction, Operator};
pub use grid::GridSpec;
pub use spectral::{Kernel, SpectralModel};
