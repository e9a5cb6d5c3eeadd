//! Pseudo-spectral solver for compressible viscous MHD on a periodic box,
//! where the magnetic field diffuses only along the two horizontal axes.
//!
//! The crate has three layers:
//!
//! * spectral machinery: [`grid`], [`fft`], [`field`], [`ops`];
//! * the flow itself: [`params`], [`state`], [`rhs`], [`stepper`];
//! * diagnostics and drivers: [`ledger`], [`ineq`], [`checkpoint`],
//!   [`config`], [`presets`], [`experiment`].
//!
//! Quadratic nonlinearities are dealiased by truncation to |k_i| <=
//! floor(n_i/3); on axes where n_i is divisible by 3 the products are formed
//! on a slightly larger companion grid so that the retained band is exact.
//! Time stepping is integrating-factor RK4 with the full linear part
//! (acoustic coupling, viscosity, horizontal magnetic diffusion) handled by
//! an exact per-mode propagator.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod fft;
pub mod field;
pub mod grid;
pub mod ineq;
pub mod ledger;
pub mod ops;
pub mod params;
pub mod presets;
pub mod rhs;
pub mod state;
pub mod stepper;

pub use error::{Error, Result};

/// Spectral coefficients are complex doubles; re-exported because public
/// signatures (spectral field accessors) expose slices of them.
pub use rustfft::num_complex::Complex64;
