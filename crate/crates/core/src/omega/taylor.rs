//! Taylor-series stepping for the companion system of an [`OdeSpec`] and for its adjoint.

use serde::{Deserialize, Serialize};

use super::ode::OdeSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaylorConfig {
    /// Spacing of the stored grid.
    pub step: f64,
    pub order: usize,
    /// Target local truncation error per substep. `None` takes exactly one Taylor step
    /// per grid interval.
    pub local_tol: Option<f64>,
}

impl Default for TaylorConfig {
    fn default() -> Self {
        TaylorConfig {
            step: 0.05,
            order: 8,
            local_tol: Some(1e-15),
        }
    }
}

impl TaylorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step <= 0.5) {
            return Err(Error::param("solver.step", "must lie in (0, 0.5]"));
        }
        if !(4..=40).contains(&self.order) {
            return Err(Error::param("solver.taylor_order", "must lie in [4, 40]"));
        }
        if let Some(t) = self.local_tol {
            if !(t > 0.0 && t < 1e-3) {
                return Err(Error::param("solver.local_tol", "must lie in (0, 1e-3)"));
            }
        }
        Ok(())
    }

    /// Largest `rho h` with `(rho h)^(N+1)/(N+1)! <= tol`.
    fn reach(&self) -> Option<f64> {
        self.local_tol.map(|tol| {
            let n1 = self.order + 1;
            let ln_fact: f64 = (1..=n1).map(|k| (k as f64).ln()).sum();
            ((tol.ln() + ln_fact) / n1 as f64).exp()
        })
    }
}

/// Integration points: uniform grid nodes split into substeps.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub points: Vec<f64>,
    /// `nodes[n]` is the index in `points` of grid node `n * step`.
    pub nodes: Vec<usize>,
    pub step: f64,
}

/// Coefficients vary on the scale of `e^x`; never step further than this fraction of a unit.
const MIN_RATE: f64 = 4.0;

/// Refuse meshes beyond this many points per grid interval; the coefficients have
/// outgrown what explicit stepping can follow.
const MAX_SUBSTEPS: f64 = 1e6;

pub(crate) fn substeps(spec: &OdeSpec, cfg: &TaylorConfig, a: f64, b: f64) -> usize {
    match cfg.reach() {
        None => 1,
        Some(kappa) => {
            let rho = spec.root_bound(a).max(spec.root_bound(b)).max(MIN_RATE);
            ((b - a).abs() * rho / kappa).ceil().clamp(1.0, MAX_SUBSTEPS) as usize
        }
    }
}

impl Mesh {
    pub fn build(spec: &OdeSpec, cfg: &TaylorConfig, n_nodes: usize) -> Result<Self> {
        let h = cfg.step;
        let mut points = vec![0.0];
        let mut nodes = vec![0];
        for n in 0..n_nodes.saturating_sub(1) {
            let a = n as f64 * h;
            let b = (n + 1) as f64 * h;
            let m = substeps(spec, cfg, a, b);
            if m as f64 >= MAX_SUBSTEPS || points.len() > 20_000_000 {
                return Err(Error::Integration {
                    x: a,
                    reason: format!("ODE coefficients too large to follow (bound {:.3e})", spec.root_bound(b)),
                });
            }
            for j in 1..m {
                points.push(a + (b - a) * j as f64 / m as f64);
            }
            points.push(b);
            nodes.push(points.len() - 1);
        }
        Ok(Mesh { points, nodes, step: h })
    }

    pub fn end(&self) -> f64 {
        *self.points.last().unwrap()
    }
}

/// One forward Taylor step of the companion system for each state column.
pub(crate) fn step_forward(spec: &OdeSpec, order: usize, x0: f64, h: f64, cols: &mut [[f64; 3]]) {
    let d = spec.order;
    let cs = spec.coefficient_series(x0, order);
    let mut series = vec![[0.0f64; 3]; order + 1];
    for col in cols.iter_mut() {
        series[0] = *col;
        for j in 0..order {
            let inv = 1.0 / (j + 1) as f64;
            let mut next = [0.0; 3];
            for k in 0..d - 1 {
                next[k] = series[j][k + 1] * inv;
            }
            let mut acc = 0.0;
            for (k, ck) in cs.iter().enumerate().take(d) {
                for i in 0..=j {
                    acc += ck[i] * series[j - i][k];
                }
            }
            next[d - 1] = acc * inv;
            series[j + 1] = next;
        }
        let mut out = [0.0; 3];
        for s in series.iter().rev() {
            for k in 0..d {
                out[k] = out[k] * h + s[k];
            }
        }
        *col = out;
    }
}

/// One Taylor step of the adjoint system `p' = -M^T p`, which keeps `p . Y` constant
/// along every solution `Y` of the companion system.
pub(crate) fn step_adjoint(spec: &OdeSpec, order: usize, x0: f64, h: f64, p: &mut [f64; 3]) {
    let d = spec.order;
    let cs = spec.coefficient_series(x0, order);
    let mut series = vec![[0.0f64; 3]; order + 1];
    series[0] = *p;
    for j in 0..order {
        let inv = 1.0 / (j + 1) as f64;
        let mut next = [0.0; 3];
        for k in 0..d {
            let mut acc = 0.0;
            for i in 0..=j {
                acc += cs[k][i] * series[j - i][d - 1];
            }
            if k > 0 {
                acc += series[j][k - 1];
            }
            next[k] = -acc * inv;
        }
        series[j + 1] = next;
    }
    let mut out = [0.0; 3];
    for s in series.iter().rev() {
        for k in 0..d {
            out[k] = out[k] * h + s[k];
        }
    }
    *p = out;
}

/// As [`advance`], failing instead of grinding through an excessive number of substeps.
pub(crate) fn advance_checked(spec: &OdeSpec, cfg: &TaylorConfig, a: f64, b: f64, cols: &mut [[f64; 3]]) -> Result<()> {
    if substeps(spec, cfg, a, b) as f64 >= MAX_SUBSTEPS {
        return Err(Error::Integration {
            x: a,
            reason: format!("ODE coefficients too large to follow (bound {:.3e})", spec.root_bound(b)),
        });
    }
    advance(spec, cfg, a, b, cols);
    Ok(())
}

/// Advance `cols` from `a` to `b` (either direction) with the substep rule of `cfg`.
pub(crate) fn advance(spec: &OdeSpec, cfg: &TaylorConfig, a: f64, b: f64, cols: &mut [[f64; 3]]) {
    if a == b {
        return;
    }
    let m = substeps(spec, cfg, a, b);
    let h = (b - a) / m as f64;
    for j in 0..m {
        step_forward(spec, cfg.order, a + j as f64 * h, h, cols);
    }
}
