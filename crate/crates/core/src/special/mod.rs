//! Gamma, confluent hypergeometric and modified Bessel functions.

mod bessel;
mod gamma;
mod hyp1f1;

pub use bessel::{bessel_basis, bessel_i_half_integer_scaled, bessel_i_neg_scaled, bessel_ik, BesselIK};
pub use gamma::{gamma_fn, ln_gamma};
pub use hyp1f1::{kummer_1f1, kummer_1f1_deriv, kummer_1f1_deriv_scaled, kummer_1f1_scaled};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialFnConfig {
    pub series_tol: f64,
    pub max_terms: usize,
    /// `|t|` above which 1F1 switches to its large-argument expansion.
    pub asymptotic_switch: f64,
}

impl Default for SpecialFnConfig {
    fn default() -> Self {
        SpecialFnConfig {
            series_tol: 1e-14,
            max_terms: 10_000,
            asymptotic_switch: 50.0,
        }
    }
}

impl SpecialFnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.series_tol > 0.0) {
            return Err(Error::param("series_tol", "must be positive"));
        }
        if self.max_terms < 100 {
            return Err(Error::param("max_terms", "must be at least 100"));
        }
        if !(self.asymptotic_switch > 0.0) {
            return Err(Error::param("asymptotic_switch", "must be positive"));
        }
        Ok(())
    }
}
