//! The combination `g = Z - c W` that carries no component of the dominant growing mode.
//!
//! Forward integration of `Z` and `W` separately leaves `Z - c W` as the difference of two
//! huge, nearly equal numbers. Instead the dominant left direction `p` is obtained by
//! integrating the adjoint system backward from far out (where it is well approximated by
//! the frozen-coefficient left eigenvector), `c` is read off from `p(0) . (Z0 - c W0) = 0`,
//! and `g` is integrated forward while its component along `p` is removed at every point.

use super::ode::OdeSpec;
use super::solution::rescale;
use super::taylor::{advance, step_adjoint, step_forward, Mesh, TaylorConfig};
use crate::error::{Error, Result};

/// Required decay `int gap` of the unwanted direction between the far end and the
/// evaluation range.
const GAP_TARGET: f64 = 40.0;
const FAR_EXTRA_CAP: f64 = 60.0;

#[derive(Debug, Clone)]
pub struct PassageProfile {
    spec: OdeSpec,
    cfg: TaylorConfig,
    pub c: f64,
    pub y_far: f64,
    points: Vec<f64>,
    states: Vec<[f64; 3]>,
    logs: Vec<f64>,
}

fn dot(a: &[f64; 3], b: &[f64; 3], d: usize) -> f64 {
    (0..d).map(|k| a[k] * b[k]).sum()
}

fn normalize(p: &mut [f64; 3], d: usize) {
    let n = dot(p, p, d).sqrt();
    for v in p.iter_mut().take(d) {
        *v /= n;
    }
}

impl PassageProfile {
    /// Builds the profile on `[0, y_max]`.
    pub fn new(spec: &OdeSpec, cfg: &TaylorConfig, y_max: f64) -> Result<Self> {
        cfg.validate()?;
        let d = spec.order;
        let h = cfg.step;
        let n_eval = (y_max.max(h) / h).ceil() as usize;
        let mut n_far = n_eval;
        let mut decay = 0.0;
        while decay < GAP_TARGET && (n_far - n_eval) as f64 * h < FAR_EXTRA_CAP {
            let (re, _) = spec.frozen_roots((n_far as f64 + 0.5) * h);
            decay += (re[0] - re[1]) * h;
            n_far += 1;
        }
        let mesh = Mesh::build(spec, cfg, n_far + 1)?;
        let m = mesh.points.len();
        let y_far = mesh.end();

        let (_, top) = spec.frozen_roots(y_far);
        let lam = top.ok_or_else(|| Error::Integration {
            x: y_far,
            reason: "dominant characteristic root is complex".into(),
        })?;
        let ev = spec.left_eigenvector(y_far, lam);
        let mut p = [0.0; 3];
        p[..d].copy_from_slice(&ev);
        normalize(&mut p, d);
        let mut dirs = vec![[0.0; 3]; m];
        dirs[m - 1] = p;
        for i in (1..m).rev() {
            let (a, b) = (mesh.points[i], mesh.points[i - 1]);
            step_adjoint(spec, cfg.order, a, b - a, &mut p);
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::Integration {
                    x: b,
                    reason: "adjoint direction is not finite".into(),
                });
            }
            normalize(&mut p, d);
            dirs[i - 1] = p;
        }

        let mut w0 = [0.0; 3];
        let mut z0 = [0.0; 3];
        w0[..d].copy_from_slice(&spec.w0);
        z0[..d].copy_from_slice(&spec.z0);
        let den = dot(&dirs[0], &w0, d);
        let num = dot(&dirs[0], &z0, d);
        if den.abs() < 1e-300 || den.abs() < 1e-14 * num.abs() {
            return Err(Error::Singular("W carries no dominant component".into()));
        }
        let c = num / den;

        let last = mesh.nodes[n_eval];
        let mut g = [0.0; 3];
        for k in 0..d {
            g[k] = z0[k] - c * w0[k];
        }
        let mut log = 0.0;
        let mut states = Vec::with_capacity(last + 1);
        let mut logs = Vec::with_capacity(last + 1);
        states.push(g);
        logs.push(0.0);
        for i in 1..=last {
            let (a, b) = (mesh.points[i - 1], mesh.points[i]);
            let mut cols = [g];
            step_forward(spec, cfg.order, a, b - a, &mut cols);
            g = cols[0];
            let pg = dot(&dirs[i], &g, d);
            for k in 0..d {
                g[k] -= pg * dirs[i][k];
            }
            if !g.iter().all(|v| v.is_finite()) {
                return Err(Error::Integration {
                    x: b,
                    reason: "passage profile is not finite".into(),
                });
            }
            let mut cols = [g];
            rescale(&mut cols, &mut log, 1e100);
            g = cols[0];
            states.push(g);
            logs.push(log);
        }
        Ok(PassageProfile {
            spec: spec.clone(),
            cfg: *cfg,
            c,
            y_far,
            points: mesh.points[..=last].to_vec(),
            states,
            logs,
        })
    }

    pub fn y_max(&self) -> f64 {
        *self.points.last().unwrap()
    }

    /// Mantissa state `(g, g', ...)` at `y` and its log scale.
    pub fn state(&self, y: f64) -> ([f64; 3], f64) {
        let y = y.clamp(0.0, self.y_max());
        let i = match self.points.binary_search_by(|v| v.partial_cmp(&y).unwrap()) {
            Ok(i) => return (self.states[i], self.logs[i]),
            Err(i) => i - 1,
        };
        let mut cols = [self.states[i]];
        advance(&self.spec, &self.cfg, self.points[i], y, &mut cols);
        (cols[0], self.logs[i])
    }

    pub fn value(&self, y: f64) -> f64 {
        let (s, l) = self.state(y);
        s[0] * l.exp()
    }

    pub fn deriv(&self, y: f64) -> f64 {
        let (s, l) = self.state(y);
        s[1] * l.exp()
    }

    /// `(ln|g(y)|, sign g(y))`.
    pub fn ln_abs(&self, y: f64) -> (f64, f64) {
        let (s, l) = self.state(y);
        (s[0].abs().ln() + l, s[0].signum())
    }

    /// `(ln|g'(y)|, sign g'(y))`.
    pub fn ln_abs_deriv(&self, y: f64) -> (f64, f64) {
        let (s, l) = self.state(y);
        (s[1].abs().ln() + l, s[1].signum())
    }

    pub fn spec(&self) -> &OdeSpec {
        &self.spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discount::DiscountFunction::*;
    use crate::levy::ModelParams;
    use crate::omega::{build_ode, c_ratio_limit, taylor_integrate};
    use crate::scale::QScalePair;

    #[test]
    fn constant_rate_matches_classical_passage() {
        for p in [
            ModelParams::new(0.05, 0.2, 6.0, 2.0, 20.0).unwrap(),
            ModelParams::new(0.05, 0.0, 6.0, 2.0, 20.0).unwrap(),
            ModelParams::new(0.05, 0.2, 0.0, 2.0, 20.0).unwrap(),
        ] {
            let spec = build_ode(&Constant { q: 0.5 }, &p, 0.0, 1.0).unwrap();
            let prof = PassageProfile::new(&spec, &TaylorConfig::default(), 8.0).unwrap();
            let cl = QScalePair::new(0.5, &p).unwrap();
            assert!((prof.c - 0.5 / cl.rootset.phi_q).abs() < 1e-10 * prof.c);
            for &y in &[0.0, 0.3, 1.0, 4.0, 8.0] {
                let want = cl.passage_total(y);
                assert!((prof.value(y) - want).abs() < 1e-9 * want, "y={y}: {} vs {want}", prof.value(y));
            }
        }
    }

    #[test]
    fn agrees_with_ratio_plateau() {
        let p = ModelParams::new(0.05, 0.0, 6.0, 2.0, 20.0).unwrap();
        let spec = build_ode(&Linear { c: 0.1 }, &p, 0.0, 1.0).unwrap();
        let cfg = TaylorConfig::default();
        let prof = PassageProfile::new(&spec, &cfg, 3.0).unwrap();
        let sol = taylor_integrate(&spec, 4.0, &cfg).unwrap();
        let c = c_ratio_limit(&sol, 1e-11).unwrap();
        assert!((prof.c - c).abs() < 1e-9 * c);
        // near the origin the direct difference still has digits to spare
        for &y in &[0.0, 0.2, 0.5] {
            let direct = sol.z(y) - c * sol.w(y);
            assert!((prof.value(y) - direct).abs() < 1e-7, "y={y}");
        }
    }

    #[test]
    fn decays_and_stays_positive() {
        let p = ModelParams::new(0.05, 0.2, 0.0, 2.0, 20.0).unwrap();
        let spec = build_ode(&Linear { c: 0.1 }, &p, 0.0, 1.0).unwrap();
        let prof = PassageProfile::new(&spec, &TaylorConfig::default(), 4.0).unwrap();
        let mut prev = prof.value(0.0);
        assert!((prev - 1.0).abs() < 1e-14);
        for k in 1..=80 {
            let v = prof.value(0.05 * k as f64);
            assert!(v > 0.0 && v < prev);
            prev = v;
        }
    }
}
