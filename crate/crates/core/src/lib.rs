//! Numerical toolkit for the damped wave equation `η² u_tt + u_t = u_xx + u - u³`
//! on the line: time stepping, weighted energy functionals, frequency
//! projections, band-limited sampling, explicit `W^{1,∞}` covers and
//! entropy-per-length estimates on empirical attractor ensembles.

pub mod covering;
pub mod dynamics;
pub mod entropy;
pub mod error;
mod fft;
pub mod field;
pub mod functionals;
pub mod sampling;
pub mod spectral;

pub use error::{Error, Result};
