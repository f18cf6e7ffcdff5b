//! Value function assembly, the alpha-limit creeping term, boundary optimisation and a
//! Monte Carlo check.
//!
//! For a threshold `u` and `y = log(s/u) >= 0` write `g(y) = Z(y) - c W(y)` for the
//! omega_u-scale functions of the untilted model (the Laplace-type transform of the first
//! passage below `u`) and `Cr(y)` for its creeping part. With exponential undershoots,
//!
//! `v(s; u) = (K - u phi/(phi+1)) (g - Cr)(y) + (K - u) Cr(y)`,
//!
//! which reduces to `(K - u phi/(phi+1)) g` without diffusion and to `(K - u) g` without jumps.

mod mc;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discount::DiscountFunction;
use crate::error::{Error, Result};
use crate::levy::ModelParams;
use crate::omega::{build_ode, PassageProfile, TaylorConfig};
use crate::scale::QScalePair;

pub use mc::{mc_estimate, McConfig, McEstimate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Sigma0,
    Lambda0,
    Full,
}

impl Regime {
    pub fn of(params: &ModelParams) -> Regime {
        match (params.has_diffusion(), params.has_jumps()) {
            (false, _) => Regime::Sigma0,
            (true, false) => Regime::Lambda0,
            (true, true) => Regime::Full,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::Sigma0 => "sigma0",
            Regime::Lambda0 => "lambda0",
            Regime::Full => "full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub levels: Vec<f64>,
    pub stabilization_tol: f64,
}

impl Default for AlphaSchedule {
    fn default() -> Self {
        AlphaSchedule {
            levels: vec![10.0, 20.0, 50.0, 150.0],
            stabilization_tol: 5e-3,
        }
    }
}

impl AlphaSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::param("alpha_schedule", "needs at least one level"));
        }
        if self.levels.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::param("alpha_schedule", "levels must be finite and positive"));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("alpha_schedule", "levels must be strictly increasing"));
        }
        if !(self.stabilization_tol > 0.0) {
            return Err(Error::param("alpha_schedule.stabilization_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Creeping term from the alpha schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaTerm {
    /// `((phi + alpha) f - phi g) / alpha` with `f = e^{alpha y} (Z_alpha - c_alpha W_alpha)(y)`.
    pub value: f64,
    /// `f` itself, the plain truncation of the limit.
    pub raw: f64,
    pub alpha: f64,
    pub stabilized: bool,
}

/// Everything needed to evaluate candidate values for any threshold.
#[derive(Debug, Clone)]
pub struct Machinery {
    pub params: ModelParams,
    pub discount: DiscountFunction,
    pub regime: Regime,
    pub taylor: TaylorConfig,
    pub schedule: AlphaSchedule,
    /// Largest price at which candidate values are requested.
    pub s_max: f64,
    /// Solve constant rates through the ODE and alpha schedule instead of the classical
    /// scale functions.
    pub ode_for_constant: bool,
}

impl Machinery {
    pub fn new(
        params: ModelParams,
        discount: DiscountFunction,
        taylor: TaylorConfig,
        schedule: AlphaSchedule,
        s_max: f64,
    ) -> Result<Self> {
        discount.validate()?;
        taylor.validate()?;
        schedule.validate()?;
        if !(s_max > 0.0 && s_max.is_finite()) {
            return Err(Error::param("s_max", "must be positive"));
        }
        Ok(Machinery {
            regime: Regime::of(&params),
            params,
            discount,
            taylor,
            schedule,
            s_max,
            ode_for_constant: false,
        })
    }

    pub fn with_ode_path(mut self) -> Self {
        self.ode_for_constant = true;
        self
    }

    /// Scale-function data for threshold `u`.
    pub fn at(&self, u: f64) -> Result<BoundaryModel<'_>> {
        if !(u > 0.0 && u < self.params.strike) {
            return Err(Error::Domain(format!("threshold u = {u} outside (0, K)")));
        }
        let y_max = (self.s_max / u).ln().max(0.0) + 0.05;
        let kind = if let (DiscountFunction::Constant { q }, false) = (self.discount, self.ode_for_constant) {
            ModelKind::Classical(QScalePair::new(q, &self.params)?)
        } else {
            let spec = build_ode(&self.discount, &self.params, 0.0, u)?;
            let g0 = PassageProfile::new(&spec, &self.taylor, y_max)?;
            let tilted = match self.regime {
                Regime::Full => self.schedule.levels.iter().map(|_| OnceLock::new()).collect(),
                _ => Vec::new(),
            };
            ModelKind::Numeric { g0, tilted }
        };
        Ok(BoundaryModel { m: self, u, y_max, kind })
    }

    fn jump_payoff(&self, u: f64) -> f64 {
        self.params.strike - u * self.params.mean_undershoot_factor()
    }
}

#[derive(Debug)]
enum ModelKind {
    Classical(QScalePair),
    Numeric {
        g0: PassageProfile,
        tilted: Vec<OnceLock<Result<PassageProfile>>>,
    },
}

/// Candidate value function for one threshold `u`.
#[derive(Debug)]
pub struct BoundaryModel<'a> {
    m: &'a Machinery,
    pub u: f64,
    y_max: f64,
    kind: ModelKind,
}

impl BoundaryModel<'_> {
    fn y_of(&self, s: f64) -> Result<f64> {
        let y = (s / self.u).ln();
        if y > self.y_max + 1e-12 {
            return Err(Error::Domain(format!(
                "price {s} beyond the prepared range (s_max = {})",
                self.m.s_max
            )));
        }
        Ok(y.max(0.0))
    }

    /// `E_s[e^{-int omega}; first passage below u]`.
    fn total(&self, y: f64) -> f64 {
        match &self.kind {
            ModelKind::Classical(p) => p.passage_total(y),
            ModelKind::Numeric { g0, .. } => g0.value(y),
        }
    }

    fn tilted_profile(&self, k: usize) -> Result<&PassageProfile> {
        let ModelKind::Numeric { tilted, .. } = &self.kind else {
            unreachable!("tilted profiles exist only for numeric models")
        };
        let alpha = self.m.schedule.levels[k];
        tilted[k]
            .get_or_init(|| {
                let spec = build_ode(&self.m.discount, &self.m.params, alpha, self.u)?;
                PassageProfile::new(&spec, &self.m.taylor, self.y_max)
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    /// Creeping part of the passage transform at `y`.
    pub fn alpha_term(&self, y: f64) -> Result<AlphaTerm> {
        match &self.kind {
            ModelKind::Classical(p) => {
                let v = p.passage_creep(y);
                Ok(AlphaTerm {
                    value: v,
                    raw: v,
                    alpha: f64::INFINITY,
                    stabilized: true,
                })
            }
            ModelKind::Numeric { g0, .. } => {
                if self.m.regime != Regime::Full {
                    return Err(Error::Domain("the alpha term is used only with jumps and diffusion".into()));
                }
                let phi = self.m.params.phi;
                let g = g0.value(y);
                let mut prev: Option<f64> = None;
                let mut last = None;
                for (k, &alpha) in self.m.schedule.levels.iter().enumerate() {
                    let prof = self.tilted_profile(k)?;
                    let f = alpha_factor(prof, alpha, y);
                    let cr = ((phi + alpha) * f - phi * g) / alpha;
                    check_creep(cr, g, alpha)?;
                    let stable = prev.is_some_and(|p| (cr - p).abs() <= self.m.schedule.stabilization_tol * cr.abs());
                    last = Some(AlphaTerm {
                        value: cr,
                        raw: f,
                        alpha,
                        stabilized: stable,
                    });
                    if stable {
                        break;
                    }
                    prev = Some(cr);
                }
                let out = last.expect("schedule is nonempty");
                if !out.stabilized && self.m.schedule.levels.len() > 1 {
                    log::warn!("alpha schedule did not stabilise at u = {}, y = {y}", self.u);
                }
                Ok(out)
            }
        }
    }

    /// `(alpha, raw, corrected)` creeping estimates at every scheduled level.
    pub fn alpha_panel(&self, s: f64) -> Result<Vec<(f64, f64, f64)>> {
        let y = self.y_of(s.max(self.u))?;
        let ModelKind::Numeric { g0, .. } = &self.kind else {
            let t = self.alpha_term(y)?;
            return Ok(vec![(t.alpha, t.raw, t.value)]);
        };
        let phi = self.m.params.phi;
        let g = g0.value(y);
        let mut out = Vec::new();
        for (k, &alpha) in self.m.schedule.levels.iter().enumerate() {
            let f = alpha_factor(self.tilted_profile(k)?, alpha, y);
            out.push((alpha, f, ((phi + alpha) * f - phi * g) / alpha));
        }
        Ok(out)
    }

    /// `v(s; u)` with a given creeping term in place of the alpha schedule.
    pub fn value_with_creep(&self, s: f64, creep: f64) -> Result<f64> {
        let k = self.m.params.strike;
        if s <= self.u {
            return Ok(k - s);
        }
        let g = self.total(self.y_of(s)?);
        Ok(self.m.jump_payoff(self.u) * (g - creep) + (k - self.u) * creep)
    }

    /// Unclipped candidate `v(s; u)`.
    pub fn raw_value(&self, s: f64) -> Result<f64> {
        let m = self.m;
        let k = m.params.strike;
        if s <= self.u {
            return Ok(k - s);
        }
        let y = self.y_of(s)?;
        let g = self.total(y);
        Ok(match m.regime {
            Regime::Sigma0 => m.jump_payoff(self.u) * g,
            Regime::Lambda0 => (k - self.u) * g,
            Regime::Full => {
                let cr = self.alpha_term(y)?.value;
                m.jump_payoff(self.u) * (g - cr) + (k - self.u) * cr
            }
        })
    }

    /// Candidate value clipped at 0; the flag reports clipping.
    pub fn candidate(&self, s: f64) -> Result<(f64, bool)> {
        let v = self.raw_value(s)?;
        if v < 0.0 {
            log::debug!("negative candidate {v:e} at s = {s}, u = {}", self.u);
            return Ok((0.0, true));
        }
        Ok((v, false))
    }

    /// `v(u+; u) - (K - u)`.
    pub fn pasting_gap(&self) -> Result<f64> {
        let u = self.u;
        Ok(self.raw_value(u * (1.0 + 1e-12))? - (self.m.params.strike - u))
    }

    /// Central difference of the pasted value function at `u`, plus one. The step is small
    /// because the fast jump mode makes the candidate strongly curved right above `u`.
    pub fn smooth_fit_gap(&self) -> Result<f64> {
        let u = self.u;
        let h = 1e-7 * u;
        let right = self.raw_value(u + h)?;
        let left = self.m.params.strike - (u - h);
        Ok((right - left) / (2.0 * h) + 1.0)
    }

    /// The fit condition that pins the optimal threshold in this regime.
    pub fn fit_gap(&self) -> Result<f64> {
        match self.m.regime {
            Regime::Sigma0 => self.pasting_gap(),
            _ => self.smooth_fit_gap(),
        }
    }
}

/// `e^{alpha y} g_alpha(y)`, formed in log space.
fn alpha_factor(prof: &PassageProfile, alpha: f64, y: f64) -> f64 {
    let (state, log) = prof.state(y);
    state[0] * (log + alpha * y).exp()
}

/// The creeping part lies in `[0, g]`; leaving it signals lost digits in the tilted profile.
fn check_creep(cr: f64, g: f64, alpha: f64) -> Result<()> {
    let slack = 1e-6 * g.abs() + 1e-300;
    if cr < -slack || cr > g + slack || !cr.is_finite() {
        return Err(Error::Precision(format!(
            "creeping estimate {cr:e} outside [0, {g:e}] at alpha = {alpha}; lower alpha"
        )));
    }
    Ok(())
}

/// `v(s; u)` for one price; builds the threshold model on the fly.
pub fn candidate_value(s: f64, u: f64, m: &Machinery) -> Result<f64> {
    if s <= u {
        return Ok(m.params.strike - s);
    }
    Ok(m.at(u)?.candidate(s)?.0)
}

/// Creeping term at price `s` for threshold `u`, using the schedule in `m`.
pub fn alpha_limit_term(s: f64, u: f64, m: &Machinery) -> Result<AlphaTerm> {
    if s <= u {
        return Err(Error::Domain("the alpha term needs s > u".into()));
    }
    let bm = m.at(u)?;
    bm.alpha_term(bm.y_of(s)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryResult {
    pub u_star: f64,
    pub fit_residual: f64,
    pub pasting_residual: f64,
    /// `(u, v(s_ref; u))` on the coarse grid.
    pub per_u: Vec<(f64, f64)>,
    /// `|u*(s_ref) - u*(s_check)|`.
    pub s_independence_gap: f64,
}

pub const GRID_POINTS: usize = 64;
const GOLDEN_TOL: f64 = 1e-6;
const S_CHECK_TOL: f64 = 1e-4;

fn maximise(s_ref: f64, m: &Machinery) -> Result<(f64, Vec<(f64, f64)>)> {
    let k = m.params.strike;
    let eps = 1e-3 * k;
    let (lo, hi) = (eps, (k - eps).min(s_ref));
    if hi <= lo {
        return Err(Error::BoundarySearch(format!("reference price {s_ref} leaves no search bracket")));
    }
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let vals: Vec<f64> = grid
        .par_iter()
        .map(|&u| candidate_value(s_ref, u, m))
        .collect::<Result<_>>()?;
    let (imax, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if imax == 0 || imax == GRID_POINTS - 1 {
        return Err(Error::BoundarySearch(format!(
            "maximiser at the bracket edge u = {:.6}; no interior optimal threshold",
            grid[imax]
        )));
    }
    let f = |u: f64| candidate_value(s_ref, u, m);
    let (mut a, mut b) = (grid[imax - 1], grid[imax + 1]);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > GOLDEN_TOL * k {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    let u = 0.5 * (a + b);
    Ok((u, grid.into_iter().zip(vals).collect()))
}

/// Secant iteration on the continuous-fit gap near the golden-section maximiser.
fn polish_continuous_fit(u0: f64, m: &Machinery) -> Result<f64> {
    let k = m.params.strike;
    let gap = |u: f64| -> Result<f64> { m.at(u)?.pasting_gap() };
    let (mut x0, mut x1) = (u0, u0 + 1e-4 * k);
    let (mut f0, mut f1) = (gap(x0)?, gap(x1)?);
    for _ in 0..30 {
        if f1 == f0 {
            break;
        }
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if !(x2 > 0.0 && x2 < k) || (x2 - u0).abs() > 1e-2 * k {
            return Ok(u0);
        }
        x0 = x1;
        f0 = f1;
        x1 = x2;
        f1 = gap(x1)?;
        if (x1 - x0).abs() < 1e-13 * k {
            break;
        }
    }
    Ok(if f1.abs() < gap(u0)?.abs() { x1 } else { u0 })
}

fn locate(s_ref: f64, m: &Machinery) -> Result<(f64, Vec<(f64, f64)>)> {
    let (u, grid) = maximise(s_ref, m)?;
    let u = match m.regime {
        Regime::Sigma0 => polish_continuous_fit(u, m)?,
        _ => u,
    };
    Ok((u, grid))
}

/// Optimal threshold from the maximisation at `s_ref`, verified at a second reference price.
pub fn optimize_boundary(s_ref: f64, m: &Machinery) -> Result<BoundaryResult> {
    let (u, per_u) = locate(s_ref, m)?;
    let s_check = (1.5 * s_ref).min(m.s_max);
    let gap = if s_check > s_ref * (1.0 + 1e-9) {
        let (u2, _) = locate(s_check, m)?;
        (u - u2).abs()
    } else {
        0.0
    };
    let k = m.params.strike;
    if gap > S_CHECK_TOL * k {
        return Err(Error::BoundarySearch(format!(
            "optimal threshold depends on the reference price: {u} at s = {s_ref}, gap {gap:e}"
        )));
    }
    let bm = m.at(u)?;
    Ok(BoundaryResult {
        u_star: u,
        fit_residual: bm.fit_gap()?.abs(),
        pasting_residual: bm.pasting_gap()?.abs(),
        per_u,
        s_independence_gap: gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueCurve {
    pub s_grid: Vec<f64>,
    pub payoff: Vec<f64>,
    pub values: Vec<f64>,
    pub u_star: f64,
    pub fit_residual: f64,
    pub pasting_residual: f64,
    pub regime: Regime,
    pub per_u: Vec<(f64, f64)>,
    pub s_independence_gap: f64,
    /// Some candidate value was negative and clipped to 0.
    pub clipped: bool,
}

/// Optimises the threshold at `s_ref` and evaluates `V` on `s_grid`.
pub fn value_curve(s_grid: &[f64], s_ref: f64, m: &Machinery) -> Result<ValueCurve> {
    let b = optimize_boundary(s_ref, m)?;
    curve_for_boundary(s_grid, b, m)
}

/// `V` on `s_grid` for an already optimised threshold.
pub fn curve_for_boundary(s_grid: &[f64], b: BoundaryResult, m: &Machinery) -> Result<ValueCurve> {
    let k = m.params.strike;
    let bm = m.at(b.u_star)?;
    let evals: Vec<(f64, bool)> = s_grid
        .par_iter()
        .map(|&s| if s <= b.u_star { Ok((k - s, false)) } else { bm.candidate(s) })
        .collect::<Result<_>>()?;
    Ok(ValueCurve {
        s_grid: s_grid.to_vec(),
        payoff: s_grid.iter().map(|&s| (k - s).max(0.0)).collect(),
        values: evals.iter().map(|e| e.0).collect(),
        clipped: evals.iter().any(|e| e.1),
        u_star: b.u_star,
        fit_residual: b.fit_residual,
        pasting_residual: b.pasting_residual,
        regime: m.regime,
        per_u: b.per_u,
        s_independence_gap: b.s_independence_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_forms::bs_put_value;
    use crate::discount::DiscountFunction::*;

    fn p1() -> ModelParams {
        ModelParams::new(0.05, 0.2, 6.0, 2.0, 20.0).unwrap()
    }
    fn p2() -> ModelParams {
        ModelParams::new(0.05, 0.0, 6.0, 2.0, 20.0).unwrap()
    }
    fn p3() -> ModelParams {
        ModelParams::new(0.05, 0.2, 0.0, 2.0, 20.0).unwrap()
    }

    fn machinery(p: ModelParams, d: DiscountFunction) -> Machinery {
        Machinery::new(p, d, TaylorConfig::default(), AlphaSchedule::default(), 60.0).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(Regime::of(&p1()), Regime::Full);
        assert_eq!(Regime::of(&p2()), Regime::Sigma0);
        assert_eq!(Regime::of(&p3()), Regime::Lambda0);
    }

    #[test]
    fn schedule_validation() {
        assert!(AlphaSchedule::default().validate().is_ok());
        let bad = AlphaSchedule { levels: vec![10.0, 5.0], stabilization_tol: 5e-3 };
        assert!(bad.validate().is_err());
        let empty = AlphaSchedule { levels: vec![], stabilization_tol: 5e-3 };
        assert!(empty.validate().is_err());
    }

    #[test]
    fn immediate_stop_below_threshold() {
        let m = machinery(p2(), Linear { c: 0.1 });
        assert_eq!(candidate_value(9.0, 10.0, &m).unwrap(), 11.0);
        assert_eq!(candidate_value(10.0, 10.0, &m).unwrap(), 10.0);
    }

    #[test]
    fn black_scholes_candidate() {
        let m = machinery(p3(), Constant { q: 0.05 });
        let u = 100.0 / 7.0;
        let v = candidate_value(20.0, u, &m).unwrap();
        let (want, _) = bs_put_value(20.0, &p3(), 0.05).unwrap();
        assert!((v - want).abs() < 1e-10 * want);
        assert!((v - 2.4641).abs() < 1e-4);
    }

    #[test]
    fn sigma_zero_constant_rate_uses_classical_passage() {
        let m = machinery(p2(), Constant { q: 0.3 });
        let (s, u): (f64, f64) = (18.0, 12.0);
        let pair = QScalePair::new(0.3, &p2()).unwrap();
        let want = (20.0 - u * 2.0 / 3.0) * (pair.z((s / u).ln()) - 0.3 / pair.rootset.phi_q * pair.w((s / u).ln()));
        let got = candidate_value(s, u, &m).unwrap();
        assert!((got - want).abs() < 1e-10 * want);
    }

    #[test]
    fn alpha_term_matches_creeping_closed_form() {
        let d = Constant { q: 0.5 };
        let m = machinery(p1(), d).with_ode_path();
        let pair = QScalePair::new(0.5, &p1()).unwrap();
        let u = 10.0;
        for &ratio in &[1.1, 1.4, 2.0] {
            let t = alpha_limit_term(u * ratio, u, &m).unwrap();
            let want = pair.passage_creep(ratio.ln());
            assert!((t.value / want - 1.0).abs() < 1e-6, "ratio {ratio}: {} vs {want}", t.value);
        }
    }

    #[test]
    fn lambda_zero_pasting_is_continuous() {
        let m = machinery(p3(), Linear { c: 0.1 });
        let bm = m.at(12.0).unwrap();
        let v = bm.candidate(12.0 * (1.0 + 1e-6)).unwrap().0;
        assert!((v - 8.0).abs() < 1e-4);
    }
}
