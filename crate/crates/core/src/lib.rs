//! Perpetual American put with asset-dependent discounting under a spectrally negative
//! Levy model (Brownian motion with drift minus exponential jumps).

pub mod closed_forms;
pub mod discount;
pub mod error;
pub mod levy;
pub mod omega;
pub mod poly;
pub mod pricer;
pub mod scale;
pub mod scenario;
pub mod special;

pub use error::{Error, Result};
pub use levy::{laplace_exponent, laplace_exponent_deriv, psi_roots, tilt, ModelParams, RootSet};
