//! Renewal-equation oracle for the omega-scale functions:
//! `F(x) = G(x) + int_0^x W(x - y) xi(y) F(y) dy` with `G = W` or `G = 1`,
//! marched with the trapezoid rule.

use crate::discount::{DiscountFunction, Xi};
use crate::error::{Error, Result};
use crate::levy::{laplace_exponent, tilt, ModelParams};
use crate::scale::QScalePair;

pub const MIN_MESH: usize = 200;

#[derive(Debug, Clone)]
pub struct VolterraSolution {
    pub x_grid: Vec<f64>,
    pub w_values: Vec<f64>,
    pub w_deriv: Vec<f64>,
    pub z_values: Vec<f64>,
    pub z_deriv: Vec<f64>,
}

impl VolterraSolution {
    fn step(&self) -> f64 {
        self.x_grid[1] - self.x_grid[0]
    }

    /// Cubic Hermite interpolation between nodes.
    fn interp(&self, vals: &[f64], ders: &[f64], x: f64) -> f64 {
        let h = self.step();
        let last = self.x_grid.len() - 1;
        let x = x.clamp(0.0, self.x_grid[last]);
        let i = ((x / h).floor() as usize).min(last - 1);
        let t = (x - self.x_grid[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * vals[i]
            + (t3 - 2.0 * t2 + t) * h * ders[i]
            + (-2.0 * t3 + 3.0 * t2) * vals[i + 1]
            + (t3 - t2) * h * ders[i + 1]
    }

    pub fn w(&self, x: f64) -> f64 {
        self.interp(&self.w_values, &self.w_deriv, x)
    }

    pub fn z(&self, x: f64) -> f64 {
        self.interp(&self.z_values, &self.z_deriv, x)
    }
}

/// Solves the W- and Z-renewal equations for `xi_u^alpha` on `mesh` uniform nodes of `[0, x_max]`.
pub fn volterra_solve(
    discount: &DiscountFunction,
    params: &ModelParams,
    alpha: f64,
    u: f64,
    x_max: f64,
    mesh: usize,
) -> Result<VolterraSolution> {
    if mesh < MIN_MESH {
        return Err(Error::param("solver.volterra_mesh", format!("needs at least {MIN_MESH} nodes")));
    }
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::param("solver.x_max", "must be positive"));
    }
    let tilted = tilt(params, alpha)?;
    let kernel = QScalePair::new(0.0, &tilted)?;
    let offset = if alpha > 0.0 { laplace_exponent(alpha, params)? } else { 0.0 };
    let xi = Xi::new(discount.shifted(u), offset);

    let n = mesh;
    let h = x_max / (n - 1) as f64;
    let x_grid: Vec<f64> = (0..n).map(|i| i as f64 * h).collect();
    let kw: Vec<f64> = x_grid.iter().map(|&x| kernel.w(x)).collect();
    let kd: Vec<f64> = x_grid.iter().map(|&x| kernel.w_prime(x)).collect();
    let xs: Vec<f64> = x_grid.iter().map(|&x| xi.eval(x)).collect();

    let swing = xs.windows(2).map(|p| (p[1] - p[0]).abs()).fold(0.0, f64::max);
    let rate = xs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if swing > 0.05 * rate.max(1e-300) || 0.5 * h * kw[0] * rate > 0.1 {
        log::warn!(
            "volterra mesh h = {h:.3e} is coarse for this rate (max step change {swing:.2e}, max rate {rate:.2e})"
        );
    }

    let march = |forcing: &dyn Fn(usize) -> f64, forcing_d: &dyn Fn(usize) -> f64| -> Result<(Vec<f64>, Vec<f64>)> {
        let mut f = vec![0.0; n];
        let mut d = vec![0.0; n];
        // g_j = xi_j F_j, the integrand factor shared by value and derivative sums
        let mut g = vec![0.0; n];
        f[0] = forcing(0);
        g[0] = xs[0] * f[0];
        d[0] = forcing_d(0) + kw[0] * g[0];
        for i in 1..n {
            let mut sw = 0.5 * kw[i] * g[0];
            let mut sd = 0.5 * kd[i] * g[0];
            for j in 1..i {
                sw += kw[i - j] * g[j];
                sd += kd[i - j] * g[j];
            }
            let den = 1.0 - 0.5 * h * kw[0] * xs[i];
            if den.abs() < 1e-12 {
                return Err(Error::Singular(format!("trapezoid step at x = {}", x_grid[i])));
            }
            f[i] = (forcing(i) + h * sw) / den;
            g[i] = xs[i] * f[i];
            d[i] = forcing_d(i) + kw[0] * g[i] + h * (sd + 0.5 * kd[0] * g[i]);
            if !f[i].is_finite() {
                return Err(Error::Integration {
                    x: x_grid[i],
                    reason: "renewal solution is not finite".into(),
                });
            }
        }
        Ok((f, d))
    };

    let (w_values, w_deriv) = march(&|i| kw[i], &|i| kd[i])?;
    let (z_values, z_deriv) = march(&|_| 1.0, &|_| 0.0)?;
    Ok(VolterraSolution {
        x_grid,
        w_values,
        w_deriv,
        z_values,
        z_deriv,
    })
}
