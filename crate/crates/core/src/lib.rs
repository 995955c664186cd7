//! Variational Monte Carlo for degenerate ground spaces with single-trunk
//! multi-head (ST-MH) neural quantum state ensembles.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: the periodic J1-J2 Heisenberg ring in the `S^z_tot = 0`
//!   sector, exact Majumdar-Ghosh states and a dense diagonalisation oracle.
//! - [`nqs`]: the shared MLP trunk, linear complex heads and their analytic
//!   derivatives, plus checkpoint I/O.
//! - [`sampler`]: Metropolis-Hastings in the fixed-magnetisation sector,
//!   per-head and shared-mixture (self-normalised importance sampling).
//! - [`trainer`]: local energies, overlap estimators, the penalised cost,
//!   single-pass gradient assembly and Adam.
//! - [`diagnostics`]: exact post-training metrics and the linear-rank
//!   representability analysis.
//! - [`costmodel`]: the analytic FLOP model and ST-MH/MT-MH break-even width.

pub mod costmodel;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod nqs;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;
