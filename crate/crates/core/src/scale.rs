//! Classical q-scale functions for the exponential-jump model, as finite sums of
//! exponentials over the roots of `psi(theta) = q`.

use crate::error::{Error, Result};
use crate::levy::{dpsi_unchecked, psi_roots, psi_unchecked, ModelParams, RootSet};

/// Largest `x` at which the classical scale functions are used by the pricing code.
pub const X_MAX: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct QScalePair {
    pub q: f64,
    pub rootset: RootSet,
    pub params: ModelParams,
}

impl QScalePair {
    pub fn new(q: f64, params: &ModelParams) -> Result<Self> {
        Ok(QScalePair {
            q,
            rootset: psi_roots(q, params)?,
            params: *params,
        })
    }

    fn phi(&self) -> f64 {
        self.rootset.phi_q
    }

    /// `ln W(x)` for `x > 0`, evaluated with the dominant exponential factored out.
    pub fn ln_w(&self, x: f64) -> f64 {
        let phi = self.phi();
        let s: f64 = self.rootset.pairs().map(|(g, u)| u * ((g - phi) * x).exp()).sum();
        phi * x + s.ln()
    }

    pub fn w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.rootset.pairs().map(|(g, u)| u * (g * x).exp()).sum()
    }

    pub fn w_prime(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        self.rootset.pairs().map(|(g, u)| g * u * (g * x).exp()).sum()
    }

    pub fn z(&self, x: f64) -> f64 {
        if x <= 0.0 || self.q == 0.0 {
            return 1.0;
        }
        let q = self.q;
        1.0 + q * self
            .rootset
            .pairs()
            .map(|(g, u)| if g == 0.0 { x * u } else { (g * x).exp_m1() / g * u })
            .sum::<f64>()
    }

    /// `Z'(x) = q W(x)`.
    pub fn z_prime(&self, x: f64) -> f64 {
        self.q * self.w(x)
    }

    /// `E_x[e^{-q tau}; tau < inf]` for the first passage below 0, i.e. `Z - (q/Phi) W`.
    /// For `q > 0` the constant and `e^{Phi x}` parts cancel exactly (`sum Upsilon/gamma = 1/q`),
    /// leaving `sum_{gamma != Phi} q (Phi - gamma)/(gamma Phi) Upsilon e^{gamma x}`.
    pub fn passage_total(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        let q = self.q;
        let phi = self.phi();
        if q == 0.0 {
            if phi > 0.0 {
                return 1.0;
            }
            return 1.0 - dpsi_unchecked(0.0, &self.params) * self.w(x);
        }
        let ip = self.rootset.phi_index();
        self.rootset
            .pairs()
            .enumerate()
            .filter(|(i, _)| *i != ip)
            .map(|(_, (g, u))| q * (phi - g) / (g * phi) * u * (g * x).exp())
            .sum()
    }

    /// `E_x[e^{-q tau}; X_tau = 0]`, the creeping part: `sigma^2/2 (W' - Phi W)`.
    pub fn passage_creep(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let s2 = self.params.sigma * self.params.sigma;
        if s2 == 0.0 {
            return 0.0;
        }
        let phi = self.phi();
        let ip = self.rootset.phi_index();
        0.5 * s2
            * self
                .rootset
                .pairs()
                .enumerate()
                .filter(|(i, _)| *i != ip)
                .map(|(_, (g, u))| (g - phi) * u * (g * x).exp())
                .sum::<f64>()
    }

    /// Numerical `int_0^inf e^{-theta x} W(x) dx` minus `1/(psi(theta) - q)`.
    pub fn laplace_check(&self, theta: f64) -> Result<f64> {
        let phi = self.phi();
        if !(theta > phi + 1e-3) {
            return Err(Error::Domain(format!(
                "theta = {theta} is too close to Phi(q) = {phi}; the transform is ill-conditioned"
            )));
        }
        let cut = (30.0 / (theta - phi)).min(X_MAX);
        let f = |x: f64| (-theta * x).exp() * self.w(x);
        let body = adaptive_simpson(&f, 0.0, cut, 1e-13, 30);
        let tail: f64 = self
            .rootset
            .pairs()
            .map(|(g, u)| u * ((g - theta) * cut).exp() / (theta - g))
            .sum();
        Ok(body + tail - 1.0 / (psi_unchecked(theta, &self.params) - self.q))
    }
}

pub(crate) fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, tol, depth)
}
