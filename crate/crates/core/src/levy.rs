//! Brownian motion with drift minus compound Poisson exponential jumps.
//!
//! The log-price is `X_t = zeta t + sigma B_t - sum_{i <= N_t} Y_i` with `N` a Poisson
//! process of rate `lambda` and `Y_i ~ Exp(phi)`. Under the martingale measure the
//! drift is pinned to `zeta = r - sigma^2/2 + lambda/(phi+1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{solve_cubic, solve_quadratic};

/// Market and model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub phi: f64,
    pub strike: f64,
    /// Drift of the log-price. Derived from `r` for a fresh model; set directly by [`tilt`].
    pub zeta: f64,
}

impl ModelParams {
    pub fn new(r: f64, sigma: f64, lambda: f64, phi: f64, strike: f64) -> Result<Self> {
        let check = |ok: bool, field: &str, why: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::param(field, why))
            }
        };
        check(r.is_finite() && r > 0.0, "r", "must be positive")?;
        check(sigma.is_finite() && sigma >= 0.0, "sigma", "must be >= 0")?;
        check(lambda.is_finite() && lambda >= 0.0, "lambda", "must be >= 0")?;
        check(phi.is_finite() && phi > 0.0, "phi", "must be positive")?;
        check(strike.is_finite() && strike > 0.0, "strike", "must be positive")?;
        check(
            sigma > 0.0 || lambda > 0.0,
            "sigma",
            "sigma and lambda cannot both be zero",
        )?;
        Ok(ModelParams {
            r,
            sigma,
            lambda,
            phi,
            strike,
            zeta: r - sigma * sigma / 2.0 + lambda / (phi + 1.0),
        })
    }

    pub fn has_diffusion(&self) -> bool {
        self.sigma > 0.0
    }

    pub fn has_jumps(&self) -> bool {
        self.lambda > 0.0
    }

    /// Mean of `u e^{-Y}` divided by `u`, i.e. `phi/(phi+1)`.
    pub fn mean_undershoot_factor(&self) -> f64 {
        self.phi / (self.phi + 1.0)
    }
}

/// Real solutions of `psi(theta) = q` with their residue weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub q: f64,
    /// For `q > 0` ascending. For `q = 0` the zero root comes first, the rest ascending.
    pub roots: Vec<f64>,
    /// Right inverse `Phi(q)`: the largest root.
    pub phi_q: f64,
    /// `1/psi'(gamma_i)`, aligned with `roots`.
    pub upsilons: Vec<f64>,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// `(gamma_i, Upsilon_i)` pairs.
    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.roots.iter().copied().zip(self.upsilons.iter().copied())
    }

    /// Index of `Phi(q)` in `roots`.
    pub fn phi_index(&self) -> usize {
        self.roots
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

fn check_pole(theta: f64, params: &ModelParams) -> Result<()> {
    if params.lambda > 0.0 && (theta + params.phi).abs() < 1e-300 {
        return Err(Error::Domain(format!(
            "theta = {theta} sits on the pole -phi of the Laplace exponent"
        )));
    }
    Ok(())
}

/// `psi(theta) = zeta theta + sigma^2 theta^2 / 2 - lambda theta / (phi + theta)`.
pub fn laplace_exponent(theta: f64, params: &ModelParams) -> Result<f64> {
    check_pole(theta, params)?;
    Ok(psi_unchecked(theta, params))
}

/// `psi'(theta) = zeta + sigma^2 theta - lambda phi / (phi + theta)^2`.
pub fn laplace_exponent_deriv(theta: f64, params: &ModelParams) -> Result<f64> {
    check_pole(theta, params)?;
    Ok(dpsi_unchecked(theta, params))
}

pub(crate) fn psi_unchecked(theta: f64, p: &ModelParams) -> f64 {
    let jump = if p.lambda > 0.0 {
        p.lambda * theta / (p.phi + theta)
    } else {
        0.0
    };
    p.zeta * theta + 0.5 * p.sigma * p.sigma * theta * theta - jump
}

pub(crate) fn dpsi_unchecked(theta: f64, p: &ModelParams) -> f64 {
    let jump = if p.lambda > 0.0 {
        p.lambda * p.phi / ((p.phi + theta) * (p.phi + theta))
    } else {
        0.0
    };
    p.zeta + p.sigma * p.sigma * theta - jump
}

/// All real solutions of `psi(theta) = q`.
pub fn psi_roots(q: f64, params: &ModelParams) -> Result<RootSet> {
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::param("q", "discount level must be finite and >= 0"));
    }
    let p = params;
    let s2 = p.sigma * p.sigma;
    let raw: Vec<f64> = if q == 0.0 {
        // theta = 0 always solves psi = 0; the rest come from the deflated polynomial.
        let rest = if p.lambda == 0.0 {
            vec![-2.0 * p.zeta / s2]
        } else if p.sigma == 0.0 {
            vec![(p.lambda - p.phi * p.zeta) / p.zeta]
        } else {
            let quad = solve_quadratic(0.5 * s2, 0.5 * s2 * p.phi + p.zeta, p.zeta * p.phi - p.lambda);
            if quad.complex.is_some() {
                return Err(Error::Degenerate("complex roots of psi(theta) = 0".into()));
            }
            quad.real
        };
        std::iter::once(0.0).chain(rest).collect()
    } else {
        let found = if p.lambda == 0.0 {
            solve_quadratic(0.5 * s2, p.zeta, -q)
        } else if p.sigma == 0.0 {
            solve_quadratic(p.zeta, p.zeta * p.phi - p.lambda - q, -q * p.phi)
        } else {
            solve_cubic(
                0.5 * s2,
                0.5 * s2 * p.phi + p.zeta,
                p.zeta * p.phi - p.lambda - q,
                -q * p.phi,
            )
        };
        if found.complex.is_some() {
            return Err(Error::Degenerate(format!("complex roots of psi(theta) = {q}")));
        }
        found.real
    };
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite root of psi(theta) = q".into()));
    }

    let mut roots: Vec<f64> = raw
        .into_iter()
        .map(|mut theta| {
            if q == 0.0 && theta == 0.0 {
                return theta;
            }
            for _ in 0..2 {
                let d = dpsi_unchecked(theta, p);
                if d == 0.0 {
                    break;
                }
                let step = (psi_unchecked(theta, p) - q) / d;
                if step.is_finite() {
                    theta -= step;
                }
            }
            theta
        })
        .collect();
    if q == 0.0 {
        roots[1..].sort_by(|a, b| a.partial_cmp(b).unwrap());
    } else {
        roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }

    let scale = 1.0 + roots.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            if (roots[i] - roots[j]).abs() < 1e-9 * scale {
                return Err(Error::Degenerate(format!(
                    "repeated root {} of psi(theta) = {q}",
                    roots[i]
                )));
            }
        }
    }
    let upsilons = roots.iter().map(|&g| 1.0 / dpsi_unchecked(g, p)).collect();
    let phi_q = roots.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(RootSet {
        q,
        roots,
        phi_q,
        upsilons,
    })
}

/// Parameters of `X` under the exponentially tilted measure `P^(alpha)`.
pub fn tilt(params: &ModelParams, alpha: f64) -> Result<ModelParams> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::param("alpha", "must be finite and >= 0"));
    }
    let p = params;
    Ok(ModelParams {
        zeta: p.zeta + p.sigma * p.sigma * alpha,
        lambda: p.lambda * p.phi / (p.phi + alpha),
        phi: p.phi + alpha,
        ..*p
    })
}
