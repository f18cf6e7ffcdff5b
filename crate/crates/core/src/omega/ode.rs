use serde::Serialize;

use crate::discount::{DiscountFunction, Xi};
use crate::error::Result;
use crate::levy::{laplace_exponent, psi_roots, tilt, ModelParams};
use crate::poly::{solve_cubic, solve_quadratic};

/// Linear ODE `f^(d) = sum_{k<d} c_k(x) f^(k)` with
/// `c_k(x) = coef[k][0] + coef[k][1] xi(x) + coef[k][2] xi'(x)`.
#[derive(Debug, Clone, Serialize)]
pub struct OdeSpec {
    pub order: usize,
    #[serde(skip)]
    pub xi: Xi,
    pub coef: [[f64; 3]; 3],
    /// Roots of `psi = 0` for the (tilted) model, zero first.
    pub roots: Vec<f64>,
    pub upsilons: Vec<f64>,
    /// `(f, f', ...)` at `x = 0` for the W- and Z-solutions.
    pub w0: Vec<f64>,
    pub z0: Vec<f64>,
    pub alpha: f64,
    pub u: f64,
}

impl OdeSpec {
    /// Coefficients for an explicit rate and root data. `roots[0]` must be 0.
    pub fn from_roots(xi: Xi, roots: &[f64], ups: &[f64], alpha: f64, u: f64) -> Self {
        let xi0 = xi.eval(0.0);
        if roots.len() == 2 {
            let (u1, u2) = (ups[0], ups[1]);
            let g2 = roots[1];
            let s = u1 + u2;
            OdeSpec {
                order: 2,
                xi,
                coef: [[0.0, -u1 * g2, s], [g2, s, 0.0], [0.0; 3]],
                roots: roots.to_vec(),
                upsilons: ups.to_vec(),
                w0: vec![s, u2 * g2 + s * s * xi0],
                z0: vec![1.0, s * xi0],
                alpha,
                u,
            }
        } else {
            let (u1, u2, u3) = (ups[0], ups[1], ups[2]);
            let (g2, g3) = (roots[1], roots[2]);
            let p = u2 * (g2 - g3) - u1 * g3;
            OdeSpec {
                order: 3,
                xi,
                coef: [
                    [0.0, u1 * g2 * g3, p],
                    [-g2 * g3, p, 0.0],
                    [g2 + g3, 0.0, 0.0],
                ],
                roots: roots.to_vec(),
                upsilons: ups.to_vec(),
                w0: vec![0.0, u2 * g2 + u3 * g3, u2 * g2 * g2 + u3 * g3 * g3],
                z0: vec![1.0, 0.0, xi0 * p],
                alpha,
                u,
            }
        }
    }

    /// Frozen coefficients `c_k(x)`.
    pub fn coefficients(&self, x: f64) -> [f64; 3] {
        let xi = self.xi.eval(x);
        let dxi = self.xi.deriv(x);
        let mut c = [0.0; 3];
        for (k, ck) in c.iter_mut().enumerate().take(self.order) {
            let t = self.coef[k];
            *ck = t[0] + t[1] * xi + t[2] * dxi;
        }
        c
    }

    /// Taylor coefficients of each `c_k(x0 + h)` up to `h^n`.
    pub fn coefficient_series(&self, x0: f64, n: usize) -> [Vec<f64>; 3] {
        let a = self.xi.taylor(x0, n + 1);
        let mut out = [vec![0.0; n + 1], vec![0.0; n + 1], vec![0.0; n + 1]];
        for k in 0..self.order {
            let t = self.coef[k];
            for i in 0..=n {
                out[k][i] = t[1] * a[i] + t[2] * (i + 1) as f64 * a[i + 1];
            }
            out[k][0] += t[0];
        }
        out
    }

    /// Upper bound on the magnitude of the frozen characteristic roots at `x`.
    pub fn root_bound(&self, x: f64) -> f64 {
        let c = self.coefficients(x);
        let d = self.order;
        let mut m = 0.0f64;
        for k in 0..d {
            let mut v = c[k].abs();
            if k == 0 {
                v *= 0.5;
            }
            m = m.max(v.powf(1.0 / (d - k) as f64));
        }
        2.0 * m
    }

    /// Real parts of the frozen characteristic roots at `x`, descending, and the
    /// dominant root when it is real.
    pub fn frozen_roots(&self, x: f64) -> (Vec<f64>, Option<f64>) {
        let c = self.coefficients(x);
        let r = if self.order == 2 {
            solve_quadratic(1.0, -c[1], -c[0])
        } else {
            solve_cubic(1.0, -c[2], -c[1], -c[0])
        };
        let re = r.real_parts_desc();
        let top = r.real.last().copied().filter(|&v| v >= re[0]);
        (re, top)
    }

    /// Left eigenvector of the companion matrix for eigenvalue `lam`.
    pub fn left_eigenvector(&self, x: f64, lam: f64) -> Vec<f64> {
        let c = self.coefficients(x);
        if self.order == 2 {
            vec![lam - c[1], 1.0]
        } else {
            vec![lam * (lam - c[2]) - c[1], lam - c[2], 1.0]
        }
    }
}

/// ODE for the omega-scale functions of `xi_u^alpha(x) = omega(u e^x) - psi(alpha)` under
/// the tilted measure.
pub fn build_ode(discount: &DiscountFunction, params: &ModelParams, alpha: f64, u: f64) -> Result<OdeSpec> {
    let tilted = tilt(params, alpha)?;
    let rs = psi_roots(0.0, &tilted)?;
    let offset = if alpha > 0.0 { laplace_exponent(alpha, params)? } else { 0.0 };
    let xi = Xi::new(discount.shifted(u), offset);
    Ok(OdeSpec::from_roots(xi, &rs.roots, &rs.upsilons, alpha, u))
}
