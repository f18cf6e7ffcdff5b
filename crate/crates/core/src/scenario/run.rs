use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ResolvedVariant, ScenarioConfig};
use crate::closed_forms::{
    bessel_scale_lambda0, bs_put_value, c_lambda0, c_sigma0, kummer_scale_sigma0, Branch, Scaled,
};
use crate::discount::DiscountFunction;
use crate::error::{Error, Result};
use crate::levy::{psi_roots, ModelParams};
use crate::omega::{build_ode, taylor_integrate, volterra_solve, PassageProfile};
use crate::pricer::{
    mc_estimate, optimize_boundary, curve_for_boundary, Machinery, McEstimate, Regime, ValueCurve,
};
use crate::scale::QScalePair;

/// Fixed 12-significant-digit format used by every CSV.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

/// Comma-separated text with a header row and LF line endings.
#[derive(Debug, Clone, Default)]
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[f64]) {
        let cells: Vec<String> = cells.iter().map(|&v| fmt_num(v)).collect();
        self.text += &cells.join(",");
        self.text.push('\n');
    }

    pub fn raw_row(&mut self, cells: &[String]) {
        self.text += &cells.join(",");
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\"").replace('\n', " "))
    } else {
        s.to_string()
    }
}

/// Files of one scenario, kept in memory until the run has finished.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

impl Artifacts {
    fn add(&mut self, name: impl Into<String>, body: impl Into<String>) {
        self.files.push((name.into(), body.into()));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.0 == name).map(|f| f.1.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
        for (name, body) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct McRow {
    pub s: f64,
    pub s_over_u: f64,
    pub value: f64,
    pub estimate: McEstimate,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VariantOutcome {
    pub label: String,
    pub regime: Regime,
    pub zeta: f64,
    pub u_star: f64,
    pub v_at_strike: f64,
    pub curve: ValueCurve,
    /// `lim Z/W` for omega itself, from the adjoint projection.
    pub c: Option<f64>,
    pub c_closed_form: Option<f64>,
    pub closed_form_delta: Option<f64>,
    pub mc: Vec<McRow>,
    pub decay_ratio: Option<f64>,
}

impl VariantOutcome {
    /// Largest `|MC - V| / V` over the checked prices.
    pub fn mc_delta(&self) -> Option<f64> {
        self.mc
            .iter()
            .map(|r| (r.estimate.mean - r.value).abs() / r.value.abs().max(1e-300))
            .reduce(f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub variants: Vec<VariantOutcome>,
    /// Failed tolerance checks, one message each.
    pub failures: Vec<String>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn s_max_for(cfg: &ScenarioConfig) -> f64 {
    let k = cfg.strike;
    let mut s = cfg.s_grid.max.max(1.5 * cfg.s_ref()).max(k);
    if cfg.checks.decay {
        s = s.max(10.0 * k);
    }
    if cfg.mc.enabled {
        s = s.max(cfg.mc.s_over_u.iter().fold(1.0f64, |a, &b| a.max(b)) * k);
    }
    s
}

fn scaled_combo(z: Scaled, w: Scaled, c: f64) -> f64 {
    // both branches of a closed form share the log scale at a given point
    let shift = w.ln_scale - z.ln_scale;
    (z.f - c * w.f * shift.exp()) * z.ln_scale.exp()
}

/// Closed-form `V(s)` when the regime and discount admit one. `u` is the threshold used
/// by the scale-function closed forms; the constant-rate Black-Scholes case carries its own.
pub fn closed_form_value(s: f64, u: f64, p: &ModelParams, d: &DiscountFunction) -> Result<Option<f64>> {
    let k = p.strike;
    let regime = Regime::of(p);
    if let (Regime::Lambda0, DiscountFunction::Constant { q }) = (regime, d) {
        return Ok(Some(bs_put_value(s, p, *q)?.0));
    }
    if d.exp_form().is_none() || d.is_constant() {
        return Ok(None);
    }
    if s <= u {
        return Ok(Some(k - s));
    }
    let du = d.shifted(u);
    let y = (s / u).ln();
    let v = match regime {
        Regime::Sigma0 => {
            let w = kummer_scale_sigma0(&du, p, Branch::W)?.eval(y)?;
            let z = kummer_scale_sigma0(&du, p, Branch::Z)?.eval(y)?;
            (k - u * p.mean_undershoot_factor()) * scaled_combo(z, w, c_sigma0(&du, p)?)
        }
        Regime::Lambda0 => {
            let w = bessel_scale_lambda0(&du, p, 0.0, Branch::W)?.eval(y)?;
            let z = bessel_scale_lambda0(&du, p, 0.0, Branch::Z)?.eval(y)?;
            (k - u) * scaled_combo(z, w, c_lambda0(&du, p)?)
        }
        Regime::Full => return Ok(None),
    };
    Ok(Some(v))
}

/// Closed-form `lim Z/W` for omega itself, when available.
pub fn closed_form_c(p: &ModelParams, d: &DiscountFunction) -> Option<f64> {
    if let DiscountFunction::Constant { q } = d {
        return psi_roots(*q, p).ok().filter(|_| *q > 0.0).map(|r| *q / r.phi_q);
    }
    d.exp_form()?;
    match Regime::of(p) {
        Regime::Sigma0 => c_sigma0(d, p).ok(),
        Regime::Lambda0 => c_lambda0(d, p).ok(),
        Regime::Full => None,
    }
}

#[derive(Serialize)]
struct RootsOut {
    q: f64,
    roots: Vec<f64>,
    phi_q: f64,
    upsilons: Vec<f64>,
}

#[derive(Serialize)]
struct DerivedOut<'a> {
    label: &'a str,
    regime: Regime,
    zeta: f64,
    roots: RootsOut,
    c: Option<f64>,
    c_closed_form: Option<f64>,
    u_star: f64,
    v_at_strike: f64,
    fit_residual: f64,
    pasting_residual: f64,
}

#[derive(Serialize)]
struct ManifestOut<'a> {
    resolved_config: &'a ScenarioConfig,
    derived: Vec<DerivedOut<'a>>,
    failures: &'a [String],
}

fn alpha_col(prefix: &str, a: f64) -> String {
    format!("{prefix}_a{a}")
}

fn scale_table(cfg: &ScenarioConfig, v: &ResolvedVariant) -> Result<Table> {
    let taylor = cfg.solver.taylor();
    let x_max = cfg.solver.x_max;
    let (p, d) = (&v.params, &v.discount);
    let regime = Regime::of(p);
    let mut header = vec!["x".to_string()];
    let mut columns: Vec<Box<dyn Fn(f64) -> Result<f64>>> = Vec::new();
    let mut x_grid = Vec::new();
    for &a in &cfg.outputs.scale_alphas {
        let sol = taylor_integrate(&build_ode(d, p, a, 1.0)?, x_max, &taylor)?;
        if x_grid.is_empty() {
            x_grid = sol.x_grid.clone();
        }
        for name in ["W", "dW", "Z", "dZ"] {
            header.push(alpha_col(name, a));
        }
        let sol = std::rc::Rc::new(sol);
        let s = sol.clone();
        columns.push(Box::new(move |x| Ok(s.w(x))));
        let s = sol.clone();
        columns.push(Box::new(move |x| Ok(s.w_prime(x))));
        let s = sol.clone();
        columns.push(Box::new(move |x| Ok(s.z(x))));
        columns.push(Box::new(move |x| Ok(sol.z_prime(x))));

        if let Some(mesh) = cfg.solver.volterra_mesh {
            let vs = std::rc::Rc::new(volterra_solve(d, p, a, 1.0, x_max, mesh)?);
            header.push(alpha_col("W_volterra", a));
            header.push(alpha_col("Z_volterra", a));
            let s = vs.clone();
            columns.push(Box::new(move |x| Ok(s.w(x))));
            columns.push(Box::new(move |x| Ok(vs.z(x))));
        }

        let closed: Option<(&str, Box<dyn Fn(f64, Branch) -> Result<Scaled>>)> = match (regime, d) {
            _ if a == 0.0 && d.is_constant() => {
                let DiscountFunction::Constant { q } = *d else { unreachable!() };
                let pair = std::rc::Rc::new(QScalePair::new(q, p)?);
                header.push(alpha_col("W_closed", a));
                header.push(alpha_col("Z_closed", a));
                let s = pair.clone();
                columns.push(Box::new(move |x| Ok(s.w(x))));
                columns.push(Box::new(move |x| Ok(pair.z(x))));
                None
            }
            (Regime::Sigma0, _) if a == 0.0 && d.exp_form().is_some() => {
                let w = kummer_scale_sigma0(d, p, Branch::W)?;
                let z = kummer_scale_sigma0(d, p, Branch::Z)?;
                Some(("closed", Box::new(move |x, b| match b {
                    Branch::W => w.eval(x),
                    Branch::Z => z.eval(x),
                })))
            }
            (Regime::Lambda0, _) if d.exp_form().is_some() && !d.is_constant() => {
                let w = bessel_scale_lambda0(d, p, a, Branch::W)?;
                let z = bessel_scale_lambda0(d, p, a, Branch::Z)?;
                Some(("closed", Box::new(move |x, b| match b {
                    Branch::W => w.eval(x),
                    Branch::Z => z.eval(x),
                })))
            }
            _ => None,
        };
        if let Some((tag, f)) = closed {
            let f = std::rc::Rc::new(f);
            for (name, b, deriv) in [("W", Branch::W, false), ("dW", Branch::W, true), ("Z", Branch::Z, false), ("dZ", Branch::Z, true)] {
                header.push(alpha_col(&format!("{name}_{tag}"), a));
                let f = f.clone();
                columns.push(Box::new(move |x| {
                    let s = f(x, b)?;
                    Ok(if deriv { s.deriv() } else { s.value() })
                }));
            }
        }
    }
    let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut t = Table::new(&refs);
    for &x in &x_grid {
        let mut row = vec![x];
        for c in &columns {
            row.push(c(x)?);
        }
        t.row(&row);
    }
    Ok(t)
}

fn ratio_table(cfg: &ScenarioConfig, v: &ResolvedVariant, c: Option<f64>, c_closed: Option<f64>) -> Result<Table> {
    let (p, d) = (&v.params, &v.discount);
    let mut header = vec!["x", "ratio", "c"];
    if c_closed.is_some() {
        header.push("c_closed");
    }
    let mut t = Table::new(&header);
    let nan = f64::NAN;
    let rows: Vec<(f64, f64)> = if let DiscountFunction::Constant { q } = *d {
        let pair = QScalePair::new(q, p)?;
        let n = (cfg.solver.x_max / cfg.solver.step).round() as usize;
        (0..=n)
            .map(|i| {
                let x = i as f64 * cfg.solver.step;
                (x, pair.z(x) / pair.w(x))
            })
            .collect()
    } else {
        let sol = taylor_integrate(&build_ode(d, p, 0.0, 1.0)?, cfg.solver.x_max, &cfg.solver.taylor())?;
        sol.x_grid.iter().map(|&x| (x, sol.ratio(x))).collect()
    };
    for (x, r) in rows {
        let mut row = vec![x, r, c.unwrap_or(nan)];
        if let Some(cc) = c_closed {
            row.push(cc);
        }
        t.row(&row);
    }
    Ok(t)
}

fn numeric_c(cfg: &ScenarioConfig, v: &ResolvedVariant) -> Result<Option<f64>> {
    let (p, d) = (&v.params, &v.discount);
    if let DiscountFunction::Constant { q } = *d {
        if q == 0.0 {
            return Ok(None);
        }
        return Ok(Some(q / psi_roots(q, p)?.phi_q));
    }
    let spec = build_ode(d, p, 0.0, 1.0)?;
    Ok(Some(PassageProfile::new(&spec, &cfg.solver.taylor(), cfg.solver.x_max)?.c))
}

fn run_variant(cfg: &ScenarioConfig, v: &ResolvedVariant, art: &mut Artifacts, failures: &mut Vec<String>) -> Result<VariantOutcome> {
    let k = cfg.strike;
    let sfx = v.suffix();
    let tag = if v.label.is_empty() { cfg.name.clone() } else { format!("{}/{}", cfg.name, v.label) };
    let m = Machinery::new(v.params, v.discount, cfg.solver.taylor(), cfg.alpha_schedule(), s_max_for(cfg))?;
    let s_grid = cfg.s_grid.values();
    let boundary = optimize_boundary(cfg.s_ref(), &m)?;
    let curve = curve_for_boundary(&s_grid, boundary, &m)?;
    let u = curve.u_star;
    let bm = m.at(u)?;
    let v_at_strike = bm.candidate(k)?.0;

    let mut t = Table::new(&["s", "payoff", "value"]);
    for i in 0..s_grid.len() {
        t.row(&[s_grid[i], curve.payoff[i], curve.values[i]]);
    }
    art.add(format!("value_curve{sfx}.csv"), t.as_str());

    let fit_kind = match curve.regime {
        Regime::Sigma0 => "continuous",
        _ => "smooth",
    };
    let mut b = String::new();
    writeln!(b, "u_star {}", fmt_num(u)).unwrap();
    writeln!(b, "fit_residual {}", fmt_num(curve.fit_residual)).unwrap();
    writeln!(b, "fit_condition {fit_kind}").unwrap();
    writeln!(b, "pasting_residual {}", fmt_num(curve.pasting_residual)).unwrap();
    writeln!(b, "regime {}", curve.regime.name()).unwrap();
    writeln!(b, "s_independence_gap {}", fmt_num(curve.s_independence_gap)).unwrap();
    writeln!(b, "clipped {}", curve.clipped).unwrap();
    art.add(format!("boundary{sfx}.txt"), b);

    if cfg.outputs.emit_per_u {
        let mut t = Table::new(&["u", "candidate"]);
        for &(uu, val) in &curve.per_u {
            t.row(&[uu, val]);
        }
        art.add(format!("per_u{sfx}.csv"), t.as_str());
    }

    let c = numeric_c(cfg, v)?;
    let c_closed = closed_form_c(&v.params, &v.discount);
    if cfg.outputs.emit_ratio {
        art.add(format!("ratio{sfx}.csv"), ratio_table(cfg, v, c, c_closed)?.as_str());
    }
    if cfg.outputs.emit_scale_functions {
        art.add(format!("scale_functions{sfx}.csv"), scale_table(cfg, v)?.as_str());
    }

    if cfg.outputs.emit_alpha_panel {
        if curve.regime == Regime::Full && !v.discount.is_constant() {
            let mut t = Table::new(&["s", "alpha", "creep_raw", "creep_corrected", "value_raw", "value_corrected"]);
            for &s in s_grid.iter().filter(|&&s| s > u) {
                for (a, raw, corrected) in bm.alpha_panel(s)? {
                    t.row(&[s, a, raw, corrected, bm.value_with_creep(s, raw)?, bm.value_with_creep(s, corrected)?]);
                }
            }
            art.add(format!("alpha_panel{sfx}.csv"), t.as_str());
        } else {
            log::warn!("{tag}: alpha panel needs a non-constant rate in the full regime; skipped");
        }
    }

    let mut closed_form_delta = None;
    if let Some(tol) = cfg.checks.closed_form_tol {
        let mut t = Table::new(&["s", "value", "closed_form"]);
        let mut worst: Option<f64> = None;
        for (i, &s) in s_grid.iter().enumerate() {
            if let Some(cf) = closed_form_value(s, u, &v.params, &v.discount)? {
                t.row(&[s, curve.values[i], cf]);
                let d = (curve.values[i] - cf).abs() / k;
                worst = Some(worst.map_or(d, |w: f64| w.max(d)));
            }
        }
        match worst {
            Some(w) => {
                art.add(format!("closed_form{sfx}.csv"), t.as_str());
                if w > tol {
                    failures.push(format!("{tag}: closed-form gap {w:.3e} K exceeds {tol:e} K"));
                }
            }
            None => failures.push(format!("{tag}: closed-form check requested but no closed form applies")),
        }
        closed_form_delta = worst;
    }

    let mut mc = Vec::new();
    if cfg.mc.enabled {
        let mcfg = cfg.mc.config();
        let mut t = Table::new(&["s", "s_over_u", "value", "mc_mean", "ci_halfwidth", "std_error", "cap_fraction", "tail_bound", "pass"]);
        for &r in &cfg.mc.s_over_u {
            let s = r * u;
            let value = bm.candidate(s)?.0;
            let e = mc_estimate(s, u, &v.params, &v.discount, &mcfg)?;
            let allowed = (cfg.checks.mc_rel_tol * value.abs()).max(cfg.checks.mc_ci_factor * e.ci_halfwidth);
            let pass = (e.mean - value).abs() <= allowed;
            if !pass {
                failures.push(format!("{tag}: MC {:.6} vs {:.6} at s/u = {r} (allowed {allowed:.3e})", e.mean, value));
            }
            t.row(&[s, r, value, e.mean, e.ci_halfwidth, e.std_error, e.cap_fraction, e.tail_bound, pass as u8 as f64]);
            mc.push(McRow { s, s_over_u: r, value, estimate: e, pass });
        }
        art.add(format!("mc_check{sfx}.csv"), t.as_str());
    }

    let decay_ratio = if cfg.checks.decay && v.discount.is_constant() {
        Some(bm.candidate(10.0 * k)?.0 / v_at_strike)
    } else {
        None
    };
    if cfg.checks.invariants {
        check_invariants(cfg, &tag, &curve, decay_ratio, failures);
    }

    Ok(VariantOutcome {
        label: v.label.clone(),
        regime: curve.regime,
        zeta: v.params.zeta,
        u_star: u,
        v_at_strike,
        curve,
        c,
        c_closed_form: c_closed,
        closed_form_delta,
        mc,
        decay_ratio,
    })
}

/// Value-function invariants on the grid; failures are appended as messages.
pub fn check_invariants(cfg: &ScenarioConfig, tag: &str, c: &ValueCurve, decay_ratio: Option<f64>, failures: &mut Vec<String>) {
    let k = cfg.strike;
    let ch = &cfg.checks;
    let mut fail = |msg: String| failures.push(format!("{tag}: {msg}"));
    let (s, v) = (&c.s_grid, &c.values);
    if !(0.0..=k).contains(&c.u_star) {
        fail(format!("u* = {} outside [0, K]", c.u_star));
    }
    if let Some(i) = (0..s.len()).find(|&i| v[i] < c.payoff[i] - ch.payoff_tol * k) {
        fail(format!("V below payoff at s = {}", s[i]));
    }
    if let Some(i) = (0..s.len()).find(|&i| v[i] > k) {
        fail(format!("V above K at s = {}", s[i]));
    }
    if let Some(i) = (1..s.len()).find(|&i| v[i] > v[i - 1] + 1e-12 * k) {
        fail(format!("V increases between s = {} and {}", s[i - 1], s[i]));
    }
    if let Some(i) = (1..s.len().saturating_sub(1)).find(|&i| v[i + 1] - 2.0 * v[i] + v[i - 1] < -ch.convexity_tol * k) {
        fail(format!("convexity violated at s = {}", s[i]));
    }
    if let Some(i) = (0..s.len()).find(|&i| s[i] <= c.u_star && v[i] != k - s[i]) {
        fail(format!("V != K - s in the stopping region at s = {}", s[i]));
    }
    if c.pasting_residual > ch.pasting_tol * k {
        fail(format!("pasting residual {:.3e} exceeds {:e} K", c.pasting_residual, ch.pasting_tol));
    }
    if c.fit_residual > ch.fit_tol {
        fail(format!("fit residual {:.3e} exceeds {:e}", c.fit_residual, ch.fit_tol));
    }
    if let Some(r) = decay_ratio {
        if r > ch.decay_ratio {
            fail(format!("V(10K)/V(K) = {r:.4} exceeds {}", ch.decay_ratio));
        }
    }
}

fn check_orderings(cfg: &ScenarioConfig, outs: &[VariantOutcome], failures: &mut Vec<String>) {
    let k = cfg.strike;
    let find = |l: &str| outs.iter().find(|o| o.label == l);
    for o in &cfg.checks.orderings {
        let (Some(lo), Some(hi)) = (find(&o.lower), find(&o.upper)) else {
            continue;
        };
        let gap: Vec<f64> = hi.curve.values.iter().zip(&lo.curve.values).map(|(a, b)| a - b).collect();
        let s = &hi.curve.s_grid;
        if let Some(i) = gap.iter().position(|&g| g < -1e-9 * k) {
            failures.push(format!("{}: V[{}] < V[{}] at s = {}", cfg.name, o.upper, o.lower, s[i]));
        }
        if o.widening {
            if let Some(i) = (1..gap.len()).find(|&i| gap[i] < gap[i - 1] - 1e-9 * k) {
                failures.push(format!(
                    "{}: gap V[{}] - V[{}] shrinks between s = {} and {}",
                    cfg.name, o.upper, o.lower, s[i - 1], s[i]
                ));
            }
        }
    }
}

/// Runs every variant of a scenario and renders its artifacts. Nothing is written.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(ScenarioReport, Artifacts)> {
    cfg.validate()?;
    let mut art = Artifacts::default();
    let mut failures = Vec::new();
    let variants = cfg.variants()?;
    let mut outs = Vec::new();
    for v in &variants {
        log::info!("{}: variant `{}`", cfg.name, v.label);
        outs.push(run_variant(cfg, v, &mut art, &mut failures)?);
    }
    check_orderings(cfg, &outs, &mut failures);

    let derived = variants
        .iter()
        .zip(&outs)
        .map(|(v, o)| {
            let q = match v.discount {
                DiscountFunction::Constant { q } => q,
                _ => 0.0,
            };
            let rs = psi_roots(q, &v.params)?;
            Ok(DerivedOut {
                label: &v.label,
                regime: o.regime,
                zeta: v.params.zeta,
                roots: RootsOut {
                    q,
                    roots: rs.roots.clone(),
                    phi_q: rs.phi_q,
                    upsilons: rs.upsilons.clone(),
                },
                c: o.c,
                c_closed_form: o.c_closed_form,
                u_star: o.u_star,
                v_at_strike: o.v_at_strike,
                fit_residual: o.curve.fit_residual,
                pasting_residual: o.curve.pasting_residual,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = ManifestOut {
        resolved_config: cfg,
        derived,
        failures: &failures,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    art.add("manifest.json", json + "\n");
    Ok((
        ScenarioReport {
            name: cfg.name.clone(),
            variants: outs,
            failures,
        },
        art,
    ))
}

/// List of scenario files, relative to the manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteManifest {
    pub scenarios: Vec<PathBuf>,
}

#[derive(Debug, Clone)]
pub enum SuiteStatus {
    Passed,
    /// Ran, but some tolerance checks failed.
    Tolerance(Vec<String>),
    /// Config or numerical error.
    Failed(Error),
}

#[derive(Debug, Clone)]
pub struct SuiteEntry {
    pub path: PathBuf,
    pub report: Option<ScenarioReport>,
    pub status: SuiteStatus,
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| matches!(e.status, SuiteStatus::Passed))
    }

    pub fn summary(&self) -> Table {
        let mut t = Table::new(&[
            "scenario",
            "variant",
            "regime",
            "u_star",
            "V_K",
            "fit_residual",
            "pasting_residual",
            "mc_delta",
            "closed_form_delta",
            "status",
        ]);
        let opt = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
        for e in &self.entries {
            let status = match &e.status {
                SuiteStatus::Passed => "ok".to_string(),
                SuiteStatus::Tolerance(f) => format!("tolerance: {}", f.join("; ")),
                SuiteStatus::Failed(err) => format!("error: {err}"),
            };
            match &e.report {
                Some(r) => {
                    for o in &r.variants {
                        t.raw_row(&[
                            csv_field(&r.name),
                            csv_field(&o.label),
                            o.regime.name().to_string(),
                            fmt_num(o.u_star),
                            fmt_num(o.v_at_strike),
                            fmt_num(o.curve.fit_residual),
                            fmt_num(o.curve.pasting_residual),
                            opt(o.mc_delta()),
                            opt(o.closed_form_delta),
                            csv_field(&status),
                        ]);
                    }
                }
                None => t.raw_row(&[
                    csv_field(&e.path.display().to_string()),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    csv_field(&status),
                ]),
            }
        }
        t
    }
}

impl SuiteManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        let m: SuiteManifest = serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        if m.scenarios.is_empty() {
            return Err(Error::config("scenarios", "the manifest lists no scenarios"));
        }
        Ok(m)
    }

    pub fn resolved_paths(&self, manifest_path: &Path) -> Vec<PathBuf> {
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        self.scenarios.iter().map(|p| if p.is_absolute() { p.clone() } else { base.join(p) }).collect()
    }
}

/// Runs every scenario of a manifest. Each scenario writes into `out_dir/<name>`, and a
/// `summary.csv` goes to `out_dir`. With `dry_run` configs are only validated.
pub fn run_suite(manifest_path: &Path, out_dir: &Path, dry_run: bool) -> Result<SuiteReport> {
    let manifest = SuiteManifest::load(manifest_path)?;
    let mut entries = Vec::new();
    for path in manifest.resolved_paths(manifest_path) {
        let entry = match ScenarioConfig::load(&path) {
            Err(e) => SuiteEntry { path, report: None, status: SuiteStatus::Failed(e) },
            Ok(_) if dry_run => SuiteEntry { path, report: None, status: SuiteStatus::Passed },
            Ok(cfg) => match run_scenario(&cfg).and_then(|(rep, art)| {
                art.write_to(&out_dir.join(&cfg.name))?;
                Ok(rep)
            }) {
                Err(e) => {
                    log::error!("{}: {e}", path.display());
                    SuiteEntry { path, report: None, status: SuiteStatus::Failed(e) }
                }
                Ok(rep) => {
                    let status = if rep.passed() {
                        SuiteStatus::Passed
                    } else {
                        SuiteStatus::Tolerance(rep.failures.clone())
                    };
                    SuiteEntry { path, report: Some(rep), status }
                }
            },
        };
        entries.push(entry);
    }
    let report = SuiteReport { entries };
    if !dry_run {
        std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
        let p = out_dir.join("summary.csv");
        std::fs::write(&p, report.summary().as_str()).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(report)
}
