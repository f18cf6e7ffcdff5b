//! Discount rate functions `omega(s)` and their log-price compositions `xi(x) = omega(e^x)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiscountFunction {
    /// `omega(s) = q`.
    Constant { q: f64 },
    /// `omega(s) = C s`.
    Linear {
        #[serde(rename = "C")]
        c: f64,
    },
    /// `omega(s) = C s^n`, `n in (0, 1]`.
    Power {
        #[serde(rename = "C")]
        c: f64,
        n: f64,
    },
    /// `omega(s) = C arctan(scale * s)`; `scale` carries the level shift `omega(u s)`.
    Arctan {
        #[serde(rename = "C")]
        c: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// `omega(s) = C sqrt(s) + Z`.
    SqrtShift {
        #[serde(rename = "C")]
        c: f64,
        #[serde(rename = "Z")]
        shift: f64,
    },
}

use DiscountFunction::*;

impl DiscountFunction {
    /// Checks parameter ranges and samples the shape requirements
    /// (nonnegative, nondecreasing, concave, derivative consistent).
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, "must be finite and positive"))
            }
        };
        match *self {
            Constant { q } => {
                if !(q.is_finite() && q >= 0.0) {
                    return Err(Error::param("q", "must be finite and >= 0"));
                }
            }
            Linear { c } => pos(c, "C")?,
            Power { c, n } => {
                pos(c, "C")?;
                if !(n > 0.0 && n <= 1.0) {
                    return Err(Error::param("n", "must lie in (0, 1]"));
                }
            }
            Arctan { c, scale } => {
                pos(c, "C")?;
                pos(scale, "scale")?;
            }
            SqrtShift { c, shift } => {
                pos(c, "C")?;
                if !(shift.is_finite() && shift >= 0.0) {
                    return Err(Error::param("Z", "must be finite and >= 0"));
                }
            }
        }
        self.check_shape()
    }

    fn check_shape(&self) -> Result<()> {
        // log-spaced samples of s over (1e-3, 1e3)
        let s: Vec<f64> = (0..=60).map(|k| 10f64.powf(-3.0 + 0.1 * k as f64)).collect();
        let w: Vec<f64> = s.iter().map(|&v| self.omega(v)).collect();
        let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..s.len() {
            if w[i] < 0.0 {
                return Err(Error::param("discount", format!("omega({}) < 0", s[i])));
            }
            if i > 0 && w[i] < w[i - 1] - 1e-12 * scale {
                return Err(Error::param("discount", "omega must be nondecreasing"));
            }
            if i > 0 && i + 1 < s.len() {
                // chord test on a nonuniform grid
                let t = (s[i] - s[i - 1]) / (s[i + 1] - s[i - 1]);
                let chord = (1.0 - t) * w[i - 1] + t * w[i + 1];
                if w[i] < chord - 1e-10 * scale {
                    return Err(Error::param("discount", "omega must be concave"));
                }
            }
        }
        for k in 0..20 {
            let x = -3.0 + 0.3 * k as f64;
            let h = 1e-5;
            let fd = (self.xi(x + h) - self.xi(x - h)) / (2.0 * h);
            let d = self.xi_prime(x);
            if (fd - d).abs() > 1e-6 * d.abs().max(1e-8) {
                return Err(Error::param("discount", "derivative of xi inconsistent"));
            }
        }
        Ok(())
    }

    pub fn omega(&self, s: f64) -> f64 {
        match *self {
            Constant { q } => q,
            Linear { c } => c * s,
            Power { c, n } => c * s.powf(n),
            Arctan { c, scale } => c * (scale * s).atan(),
            SqrtShift { c, shift } => c * s.sqrt() + shift,
        }
    }

    pub fn xi(&self, x: f64) -> f64 {
        match *self {
            Constant { q } => q,
            Linear { c } => c * x.exp(),
            Power { c, n } => c * (n * x).exp(),
            Arctan { c, scale } => c * (scale * x.exp()).atan(),
            SqrtShift { c, shift } => c * (0.5 * x).exp() + shift,
        }
    }

    pub fn xi_prime(&self, x: f64) -> f64 {
        match *self {
            Constant { .. } => 0.0,
            Linear { c } => c * x.exp(),
            Power { c, n } => c * n * (n * x).exp(),
            Arctan { c, scale } => {
                let w = scale * x.exp();
                // w/(1+w^2) written to stay finite for large w
                c / (w + 1.0 / w)
            }
            SqrtShift { c, .. } => 0.5 * c * (0.5 * x).exp(),
        }
    }

    /// `omega_u(s) = omega(u s)`.
    pub fn shifted(&self, u: f64) -> DiscountFunction {
        match *self {
            Constant { q } => Constant { q },
            Linear { c } => Linear { c: c * u },
            Power { c, n } => Power { c: c * u.powf(n), n },
            Arctan { c, scale } => Arctan { c, scale: scale * u },
            SqrtShift { c, shift } => SqrtShift { c: c * u.sqrt(), shift },
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Constant { .. })
    }

    /// `(C, n)` when `xi(x) = C e^{n x}` exactly (linear and power kinds).
    pub fn exp_form(&self) -> Option<(f64, f64)> {
        match *self {
            Linear { c } => Some((c, 1.0)),
            Power { c, n } => Some((c, n)),
            _ => None,
        }
    }

    /// `int_{x0}^{x1} xi(y) dy`.
    pub fn xi_integral(&self, x0: f64, x1: f64) -> f64 {
        match *self {
            Constant { q } => q * (x1 - x0),
            Linear { c } => c * (x1.exp() - x0.exp()),
            Power { c, n } => c / n * ((n * x1).exp() - (n * x0).exp()),
            SqrtShift { c, shift } => 2.0 * c * ((0.5 * x1).exp() - (0.5 * x0).exp()) + shift * (x1 - x0),
            Arctan { .. } => gauss_legendre(|y| self.xi(y), x0, x1),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Constant { .. } => "constant",
            Linear { .. } => "linear",
            Power { .. } => "power",
            Arctan { .. } => "arctan",
            SqrtShift { .. } => "sqrt_shift",
        }
    }
}

/// Composite 8-point Gauss-Legendre on panels of width at most 0.25.
fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const X: [f64; 4] = [
        0.183_434_642_495_649_8,
        0.525_532_409_916_329,
        0.796_666_477_413_626_7,
        0.960_289_856_497_536_3,
    ];
    const W: [f64; 4] = [
        0.362_683_783_378_362,
        0.313_706_645_877_887_3,
        0.222_381_034_453_374_5,
        0.101_228_536_290_376_3,
    ];
    let panels = (((b - a).abs() / 0.25).ceil() as usize).max(1);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (x, w) in X.iter().zip(W.iter()) {
            total += w * half * (f(mid - half * x) + f(mid + half * x));
        }
    }
    total
}

/// The rate `xi_u^alpha(x) = omega(u e^x) - psi(alpha)` driving an ODE or Volterra solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Xi {
    pub omega: DiscountFunction,
    pub offset: f64,
}

impl Xi {
    pub fn new(omega: DiscountFunction, offset: f64) -> Self {
        Xi { omega, offset }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.omega.xi(x) - self.offset
    }

    pub fn deriv(&self, x: f64) -> f64 {
        self.omega.xi_prime(x)
    }

    /// Taylor coefficients `a_k`, `xi(x0 + h) = sum a_k h^k`, for `k = 0..=order`.
    pub fn taylor(&self, x0: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        let exp_series = |amp: f64, rate: f64, out: &mut [f64]| {
            let mut term = amp;
            for (k, o) in out.iter_mut().enumerate() {
                if k > 0 {
                    term *= rate / k as f64;
                }
                *o += term;
            }
        };
        match self.omega {
            Constant { q } => out[0] = q,
            Linear { c } => exp_series(c * x0.exp(), 1.0, &mut out),
            Power { c, n } => exp_series(c * (n * x0).exp(), n, &mut out),
            SqrtShift { c, shift } => {
                exp_series(c * (0.5 * x0).exp(), 0.5, &mut out);
                out[0] += shift;
            }
            Arctan { c, scale } => {
                let w0 = scale * x0.exp();
                // w(h) = w0 e^h; arctan(w)' = w' / (1 + w^2), divided as power series
                let mut w = vec![0.0; order + 1];
                exp_series(w0, 1.0, &mut w);
                let mut den = vec![0.0; order + 1];
                for i in 0..=order {
                    for j in 0..=order - i {
                        den[i + j] += w[i] * w[j];
                    }
                }
                den[0] += 1.0;
                // w' series equals w for the exponential
                let mut g = vec![0.0; order];
                for k in 0..order {
                    let mut acc = w[k];
                    for j in 1..=k {
                        acc -= den[j] * g[k - j];
                    }
                    g[k] = acc / den[0];
                }
                out[0] = c * w0.atan();
                for k in 1..=order {
                    out[k] = c * g[k - 1] / k as f64;
                }
            }
        }
        out[0] -= self.offset;
        out
    }
}
