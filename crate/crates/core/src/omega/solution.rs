use super::ode::OdeSpec;
use super::taylor::{advance, advance_checked, Mesh, TaylorConfig};
use crate::error::{Error, Result};

/// Joint rescaling threshold for the (W, Z) pair.
pub const RESCALE_AT: f64 = 1e200;
/// Furthest point to which the ratio plateau search extends an integration.
pub const X_CAP: f64 = 60.0;
pub const PLATEAU_WINDOW: f64 = 2.0;

/// W- and Z-solutions of an [`OdeSpec`] on a uniform grid. Stored values are mantissas;
/// the true value at node `n` is the mantissa times `exp(rescale_log[n])`.
#[derive(Debug, Clone)]
pub struct OmegaScaleSolution {
    pub spec: OdeSpec,
    pub cfg: TaylorConfig,
    pub x_grid: Vec<f64>,
    pub w_values: Vec<f64>,
    pub w_deriv: Vec<f64>,
    pub z_values: Vec<f64>,
    pub z_deriv: Vec<f64>,
    pub rescale_log: Vec<f64>,
    /// Plateau of `Z/W` within the integrated range, if one was reached.
    pub c_ratio: Option<f64>,
    states: Vec<[[f64; 3]; 2]>,
}

fn seed(spec: &OdeSpec) -> [[f64; 3]; 2] {
    let mut s = [[0.0; 3]; 2];
    for k in 0..spec.order {
        s[0][k] = spec.w0[k];
        s[1][k] = spec.z0[k];
    }
    s
}

pub(crate) fn rescale(cols: &mut [[f64; 3]], log: &mut f64, limit: f64) {
    let m = cols.iter().flat_map(|c| c.iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    if m > limit || (m > 0.0 && m < 1.0 / limit) {
        // power-of-two factors keep every mantissa bit intact
        let e = m.log2().round() as i32;
        let inv = 2f64.powi(-e);
        for c in cols.iter_mut() {
            for v in c.iter_mut() {
                *v *= inv;
            }
        }
        *log += e as f64 * std::f64::consts::LN_2;
    }
}

fn check_finite(cols: &[[f64; 3]], x: f64) -> Result<()> {
    if cols.iter().flat_map(|c| c.iter()).all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Integration {
            x,
            reason: "non-finite state despite rescaling".into(),
        })
    }
}

/// Integrates the W- and Z-problems of `spec` on `[0, x_max]`.
pub fn taylor_integrate(spec: &OdeSpec, x_max: f64, cfg: &TaylorConfig) -> Result<OmegaScaleSolution> {
    taylor_integrate_with(spec, x_max, cfg, RESCALE_AT)
}

/// As [`taylor_integrate`] with an explicit rescaling threshold.
pub fn taylor_integrate_with(
    spec: &OdeSpec,
    x_max: f64,
    cfg: &TaylorConfig,
    rescale_at: f64,
) -> Result<OmegaScaleSolution> {
    cfg.validate()?;
    if !(x_max > 0.0 && x_max.is_finite()) {
        return Err(Error::param("solver.x_max", "must be positive"));
    }
    let n_nodes = (x_max / cfg.step).round() as usize + 1;
    let mesh = Mesh::build(spec, cfg, n_nodes)?;
    let mut cols = seed(spec);
    let mut log = 0.0;
    let mut states = vec![cols];
    let mut logs = vec![0.0];
    let mut next_node = 1;
    for i in 1..mesh.points.len() {
        let (a, b) = (mesh.points[i - 1], mesh.points[i]);
        advance(spec, &TaylorConfig { local_tol: None, ..*cfg }, a, b, &mut cols);
        check_finite(&cols, b)?;
        rescale(&mut cols, &mut log, rescale_at);
        if next_node < mesh.nodes.len() && mesh.nodes[next_node] == i {
            states.push(cols);
            logs.push(log);
            next_node += 1;
        }
    }
    let x_grid: Vec<f64> = (0..n_nodes).map(|n| n as f64 * cfg.step).collect();
    let mut sol = OmegaScaleSolution {
        spec: spec.clone(),
        cfg: *cfg,
        w_values: states.iter().map(|s| s[0][0]).collect(),
        w_deriv: states.iter().map(|s| s[0][1]).collect(),
        z_values: states.iter().map(|s| s[1][0]).collect(),
        z_deriv: states.iter().map(|s| s[1][1]).collect(),
        x_grid,
        rescale_log: logs,
        c_ratio: None,
        states,
    };
    sol.c_ratio = plateau(1e-6, |x| sol.ratio_at_node_x(x)).ok().flatten();
    Ok(sol)
}

impl OmegaScaleSolution {
    pub fn x_max(&self) -> f64 {
        *self.x_grid.last().unwrap()
    }

    fn ratio_at_node_x(&self, x: f64) -> Option<f64> {
        if x > self.x_max() + 1e-12 {
            return None;
        }
        Some(self.ratio(x))
    }

    /// Mantissa states of (W, Z) at `x` and the log scale they share.
    pub fn state_at(&self, x: f64) -> ([[f64; 3]; 2], f64) {
        let x = x.clamp(0.0, self.x_max());
        let n = ((x / self.cfg.step).floor() as usize).min(self.x_grid.len() - 1);
        let mut cols = self.states[n];
        advance(&self.spec, &self.cfg, self.x_grid[n], x, &mut cols);
        (cols, self.rescale_log[n])
    }

    pub fn w(&self, x: f64) -> f64 {
        let (s, l) = self.state_at(x);
        s[0][0] * l.exp()
    }

    pub fn z(&self, x: f64) -> f64 {
        let (s, l) = self.state_at(x);
        s[1][0] * l.exp()
    }

    pub fn w_prime(&self, x: f64) -> f64 {
        let (s, l) = self.state_at(x);
        s[0][1] * l.exp()
    }

    pub fn z_prime(&self, x: f64) -> f64 {
        let (s, l) = self.state_at(x);
        s[1][1] * l.exp()
    }

    pub fn ratio(&self, x: f64) -> f64 {
        let (s, _) = self.state_at(x);
        s[1][0] / s[0][0]
    }

    /// `Z(x) - c W(x)` as `(mantissa, log scale)`.
    pub fn combination(&self, x: f64, c: f64) -> (f64, f64) {
        let (s, l) = self.state_at(x);
        (s[1][0] - c * s[0][0], l)
    }
}

fn plateau<F: FnMut(f64) -> Option<f64>>(tol: f64, mut ratio: F) -> Result<Option<f64>> {
    let mut hist: Vec<f64> = Vec::new();
    let mut x = 0.0;
    loop {
        x += 1.0;
        let Some(r) = ratio(x) else { return Ok(None) };
        hist.push(r);
        let k = hist.len();
        let need = PLATEAU_WINDOW as usize;
        if k > need {
            let flat = (0..need).all(|j| {
                let (a, b) = (hist[k - 1 - j], hist[k - 2 - j]);
                (a - b).abs() < tol * a.abs()
            });
            if flat {
                return Ok(Some(r));
            }
        }
    }
}

/// `lim Z/W` by plateau detection, integrating beyond the solution's range up to
/// [`X_CAP`] when needed.
pub fn c_ratio_limit(sol: &OmegaScaleSolution, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let mut cols = *sol.states.last().unwrap();
    let mut log = *sol.rescale_log.last().unwrap();
    let mut at = sol.x_max();
    let spec = &sol.spec;
    let cfg = sol.cfg;
    let mut failed: Option<Error> = None;
    let found = plateau(tol, |x| {
        if x <= sol.x_max() + 1e-12 {
            return Some(sol.ratio(x));
        }
        if x > X_CAP || failed.is_some() {
            return None;
        }
        let stepped = advance_checked(spec, &cfg, at, x, &mut cols).and_then(|_| check_finite(&cols, x));
        at = x;
        if let Err(e) = stepped {
            failed = Some(e);
            return None;
        }
        rescale(&mut cols, &mut log, RESCALE_AT);
        Some(cols[1][0] / cols[0][0])
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    found.ok_or(Error::NoPlateau { x_cap: X_CAP })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discount::DiscountFunction::{self, *};
    use crate::levy::ModelParams;
    use crate::omega::build_ode;
    use crate::scale::QScalePair;

    fn p1() -> ModelParams {
        ModelParams::new(0.05, 0.2, 6.0, 2.0, 20.0).unwrap()
    }
    fn p2() -> ModelParams {
        ModelParams::new(0.05, 0.0, 6.0, 2.0, 20.0).unwrap()
    }

    fn solve(d: DiscountFunction, p: &ModelParams, x_max: f64, cfg: &TaylorConfig) -> OmegaScaleSolution {
        let spec = build_ode(&d, p, 0.0, 1.0).unwrap();
        taylor_integrate(&spec, x_max, cfg).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_rate_is_classical_w() {
        let p = p2();
        let sol = solve(Constant { q: 0.0 }, &p, 10.0, &TaylorConfig::default());
        let cl = QScalePair::new(0.0, &p).unwrap();
        for (i, &x) in sol.x_grid.iter().enumerate() {
            let w = sol.w_values[i] * sol.rescale_log[i].exp();
            assert!(rel(w, cl.w(x)) < 1e-9, "x={x}");
            assert!((sol.z_values[i] * sol.rescale_log[i].exp() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_rate_is_classical_q_scale() {
        let p = p1();
        let sol = solve(Constant { q: 0.5 }, &p, 5.0, &TaylorConfig::default());
        let cl = QScalePair::new(0.5, &p).unwrap();
        for (i, &x) in sol.x_grid.iter().enumerate().skip(1) {
            assert!(rel(sol.w_values[i], cl.w(x)) < 1e-8, "W at x={x}");
            assert!(rel(sol.z_values[i], cl.z(x)) < 1e-8, "Z at x={x}");
            assert!(rel(sol.w_deriv[i], cl.w_prime(x)) < 1e-8, "W' at x={x}");
        }
    }

    #[test]
    fn convergence_order() {
        let p = p1();
        let cl = QScalePair::new(0.5, &p).unwrap();
        let order = 4;
        let err = |step: f64| {
            let cfg = TaylorConfig { step, order, local_tol: None };
            let sol = solve(Constant { q: 0.5 }, &p, 5.0, &cfg);
            sol.x_grid
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &x)| rel(sol.w_values[i], cl.w(x)))
                .fold(0.0f64, f64::max)
        };
        let (e1, e2) = (err(0.01), err(0.005));
        assert!(e1 / e2 >= 2f64.powi(order as i32 - 1), "{e1} {e2}");
    }

    #[test]
    fn dense_output_is_continuous() {
        let sol = solve(Arctan { c: 0.5, scale: 1.0 }, &p2(), 4.0, &TaylorConfig::default());
        for n in [3usize, 17, 60] {
            let x = sol.x_grid[n + 1] - 1e-14;
            let (s, l) = sol.state_at(x);
            assert!((s[0][0] * (l - sol.rescale_log[n + 1]).exp() - sol.w_values[n + 1]).abs() < 1e-10 * sol.w_values[n + 1]);
        }
    }

    #[test]
    fn positive_w_for_nonnegative_rate() {
        for d in [Linear { c: 0.1 }, Power { c: 0.1, n: 0.5 }, Arctan { c: 0.5, scale: 1.0 }] {
            for p in [p1(), p2()] {
                let sol = solve(d, &p, 8.0, &TaylorConfig::default());
                for i in 1..sol.x_grid.len() {
                    assert!(sol.w_values[i] > 0.0);
                    assert!(sol.z_values[i] * sol.rescale_log[i].exp() >= 1.0 - 1e-12);
                }
            }
        }
    }

    #[test]
    fn rescaling_is_invisible() {
        let spec = build_ode(&Linear { c: 0.1 }, &p1(), 0.0, 1.0).unwrap();
        let cfg = TaylorConfig::default();
        let a = taylor_integrate(&spec, 6.0, &cfg).unwrap();
        let b = taylor_integrate_with(&spec, 6.0, &cfg, 10.0).unwrap();
        assert!(b.rescale_log.last().unwrap() > &0.0);
        let c = c_ratio_limit(&a, 1e-10).unwrap();
        for &x in &[0.5, 2.0, 4.0, 6.0] {
            let (ma, la) = a.combination(x, c);
            let (mb, lb) = b.combination(x, c);
            let va = ma * la.exp();
            let vb = mb * lb.exp();
            assert!((va - vb).abs() <= 1e-10 * va.abs().max(a.z(x).abs() * 1e-6), "x={x}: {va} {vb}");
        }
    }

    #[test]
    fn constant_rate_ratio_limit() {
        let p = p1();
        let sol = solve(Constant { q: 0.5 }, &p, 20.0, &TaylorConfig::default());
        let cl = QScalePair::new(0.5, &p).unwrap();
        let c = c_ratio_limit(&sol, 1e-10).unwrap();
        assert!(rel(c, 0.5 / cl.rootset.phi_q) < 1e-9);
        assert!(rel(sol.c_ratio.unwrap(), c) < 1e-5);
    }

    #[test]
    fn ratio_search_extends() {
        let sol = solve(Linear { c: 0.1 }, &p2(), 1.0, &TaylorConfig::default());
        assert!(sol.c_ratio.is_none());
        let c = c_ratio_limit(&sol, 1e-8).unwrap();
        assert!(c > 0.0);
    }
}
