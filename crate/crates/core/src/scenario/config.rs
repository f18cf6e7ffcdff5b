use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::discount::DiscountFunction;
use crate::error::{Error, Result};
use crate::levy::ModelParams;
use crate::omega::{TaylorConfig, MIN_MESH};
use crate::pricer::{AlphaSchedule, McConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub r: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    /// Uniform grid including both ends.
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.min];
        }
        (0..n)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub step: f64,
    pub taylor_order: usize,
    pub local_tol: Option<f64>,
    /// Range of emitted scale functions and ratios.
    pub x_max: f64,
    /// Nodes of the renewal-equation cross-check; `None` skips it.
    pub volterra_mesh: Option<usize>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let t = TaylorConfig::default();
        SolverSpec {
            step: t.step,
            taylor_order: t.order,
            local_tol: t.local_tol,
            x_max: 4.0,
            volterra_mesh: None,
        }
    }
}

impl SolverSpec {
    pub fn taylor(&self) -> TaylorConfig {
        TaylorConfig {
            step: self.step,
            order: self.taylor_order,
            local_tol: self.local_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSpec {
    pub enabled: bool,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub t_max: f64,
    /// Starting prices as multiples of `u*`.
    pub s_over_u: Vec<f64>,
}

impl Default for McSpec {
    fn default() -> Self {
        let c = McConfig::default();
        McSpec {
            enabled: false,
            n_paths: c.n_paths,
            dt: c.dt,
            seed: c.seed,
            t_max: c.t_max,
            s_over_u: vec![1.2],
        }
    }
}

impl McSpec {
    pub fn config(&self) -> McConfig {
        McConfig {
            n_paths: self.n_paths,
            dt: self.dt,
            seed: self.seed,
            t_max: self.t_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
    pub emit_scale_functions: bool,
    pub emit_ratio: bool,
    pub emit_per_u: bool,
    pub emit_alpha_panel: bool,
    /// Tilt levels for `scale_functions.csv`.
    pub scale_alphas: Vec<f64>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: None,
            emit_scale_functions: false,
            emit_ratio: false,
            emit_per_u: true,
            emit_alpha_panel: false,
            scale_alphas: vec![0.0],
        }
    }
}

/// `upper` must dominate `lower` on the whole grid; with `widening` the gap must not shrink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrderingCheck {
    pub lower: String,
    pub upper: String,
    #[serde(default)]
    pub widening: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Checks {
    pub invariants: bool,
    pub fit_tol: f64,
    /// Multiples of `K`.
    pub pasting_tol: f64,
    pub convexity_tol: f64,
    pub payoff_tol: f64,
    /// `V(10K) <= decay_ratio V(K)`.
    pub decay: bool,
    pub decay_ratio: f64,
    pub orderings: Vec<OrderingCheck>,
    pub mc_rel_tol: f64,
    pub mc_ci_factor: f64,
    /// Largest allowed `|V - V_closed| / K` where a closed form exists.
    pub closed_form_tol: Option<f64>,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            invariants: true,
            fit_tol: 1e-4,
            pasting_tol: 1e-6,
            convexity_tol: 1e-6,
            payoff_tol: 1e-8,
            decay: false,
            decay_ratio: 0.05,
            orderings: Vec::new(),
            mc_rel_tol: 0.02,
            mc_ci_factor: 3.0,
            closed_form_tol: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<DiscountFunction>,
}

fn default_alpha_levels() -> Vec<f64> {
    AlphaSchedule::default().levels
}

fn default_alpha_tol() -> f64 {
    AlphaSchedule::default().stabilization_tol
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelSpec,
    #[serde(rename = "K")]
    pub strike: f64,
    pub discount: DiscountFunction,
    #[serde(default)]
    pub variants: Vec<Variant>,
    pub s_grid: GridSpec,
    /// Reference price for the threshold search; defaults to `K`.
    #[serde(default)]
    pub s_ref: Option<f64>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default = "default_alpha_levels")]
    pub alpha_schedule: Vec<f64>,
    #[serde(default = "default_alpha_tol")]
    pub alpha_tol: f64,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub checks: Checks,
}

/// One fully resolved model/discount pair of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedVariant {
    /// Empty for a scenario without variants.
    pub label: String,
    pub params: ModelParams,
    pub discount: DiscountFunction,
}

impl ResolvedVariant {
    /// File-name suffix: `_label`, or nothing.
    pub fn suffix(&self) -> String {
        if self.label.is_empty() {
            String::new()
        } else {
            format!("_{}", self.label)
        }
    }
}

/// Re-roots an [`Error::InvalidParameter`] under `prefix`.
fn under(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::config(format!("{prefix}.{field}"), reason),
        Error::Config { .. } => e,
        other => Error::config(prefix, other.to_string()),
    }
}

fn file_safe(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn params_of(model: &ModelSpec, strike: f64, prefix: &str) -> Result<ModelParams> {
    ModelParams::new(model.r, model.sigma, model.lambda, model.phi, strike).map_err(|e| match e {
        Error::InvalidParameter { field, reason } if field == "strike" => Error::config("K", reason),
        other => under(prefix, other),
    })
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        // a written manifest.json carries the config it was produced from
        let value = match value {
            serde_json::Value::Object(mut map) if map.contains_key("resolved_config") => {
                map.remove("resolved_config").unwrap()
            }
            v => v,
        };
        let cfg: ScenarioConfig = serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            Error::config(path, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn s_ref(&self) -> f64 {
        self.s_ref.unwrap_or(self.strike)
    }

    pub fn alpha_schedule(&self) -> AlphaSchedule {
        AlphaSchedule {
            levels: self.alpha_schedule.clone(),
            stabilization_tol: self.alpha_tol,
        }
    }

    pub fn variants(&self) -> Result<Vec<ResolvedVariant>> {
        if self.variants.is_empty() {
            return Ok(vec![ResolvedVariant {
                label: String::new(),
                params: params_of(&self.model, self.strike, "model")?,
                discount: self.discount,
            }]);
        }
        self.variants
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let p = format!("variants[{i}]");
                let model = v.model.unwrap_or(self.model);
                let prefix = if v.model.is_some() { format!("{p}.model") } else { "model".into() };
                Ok(ResolvedVariant {
                    label: v.label.clone(),
                    params: params_of(&model, self.strike, &prefix)?,
                    discount: v.discount.unwrap_or(self.discount),
                })
            })
            .collect()
    }

    /// Semantic checks beyond the schema.
    pub fn validate(&self) -> Result<()> {
        if !file_safe(&self.name) {
            return Err(Error::config("name", "must be nonempty and use only [A-Za-z0-9_.-]"));
        }
        let g = &self.s_grid;
        if g.points < 2 {
            return Err(Error::config("s_grid.points", "the price grid needs at least 2 points"));
        }
        if !(g.min.is_finite() && g.min > 0.0) {
            return Err(Error::config("s_grid.min", "must be positive"));
        }
        if !(g.max.is_finite() && g.max > g.min) {
            return Err(Error::config("s_grid.max", "must exceed s_grid.min"));
        }
        if !(self.strike > 0.0 && self.strike.is_finite()) {
            return Err(Error::config("K", "must be positive"));
        }
        if !(self.s_ref() > 0.0 && self.s_ref().is_finite()) {
            return Err(Error::config("s_ref", "must be positive"));
        }
        self.solver.taylor().validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } => Error::config(field, reason),
            other => other,
        })?;
        if !(self.solver.x_max > 0.0 && self.solver.x_max.is_finite()) {
            return Err(Error::config("solver.x_max", "must be positive"));
        }
        if let Some(m) = self.solver.volterra_mesh {
            if m < MIN_MESH {
                return Err(Error::config("solver.volterra_mesh", format!("needs at least {MIN_MESH} nodes")));
            }
        }
        self.alpha_schedule().validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } if field.contains("tol") => Error::config("alpha_tol", reason),
            Error::InvalidParameter { reason, .. } => Error::config("alpha_schedule", reason),
            other => other,
        })?;
        for (i, a) in self.outputs.scale_alphas.iter().enumerate() {
            if !(a.is_finite() && *a >= 0.0) {
                return Err(Error::config(format!("outputs.scale_alphas[{i}]"), "must be finite and >= 0"));
            }
        }
        let mut labels = HashSet::new();
        for (i, v) in self.variants.iter().enumerate() {
            if !file_safe(&v.label) {
                return Err(Error::config(
                    format!("variants[{i}].label"),
                    "must be nonempty and use only [A-Za-z0-9_.-]",
                ));
            }
            if !labels.insert(v.label.as_str()) {
                return Err(Error::config(format!("variants[{i}].label"), "duplicate label"));
            }
        }
        for (i, o) in self.checks.orderings.iter().enumerate() {
            for (field, l) in [("lower", &o.lower), ("upper", &o.upper)] {
                if !labels.contains(l.as_str()) {
                    return Err(Error::config(
                        format!("checks.orderings[{i}].{field}"),
                        format!("no variant labelled `{l}`"),
                    ));
                }
            }
        }
        let base_prefix = |i: usize, overridden: bool| if overridden { format!("variants[{i}].discount") } else { "discount".into() };
        let resolved = self.variants()?;
        for (i, v) in resolved.iter().enumerate() {
            let overridden = self.variants.get(i).is_some_and(|x| x.discount.is_some());
            v.discount.validate().map_err(|e| under(&base_prefix(i, overridden), e))?;
            if self.mc.enabled {
                self.mc.config().validate(&v.params).map_err(|e| match e {
                    Error::InvalidParameter { field, reason } => Error::config(field, reason),
                    other => other,
                })?;
            }
        }
        if self.mc.enabled {
            for (i, r) in self.mc.s_over_u.iter().enumerate() {
                if !(r.is_finite() && *r >= 1.0 && *r <= 10.0) {
                    return Err(Error::config(format!("mc.s_over_u[{i}]"), "must lie in [1, 10]"));
                }
            }
        }
        Ok(())
    }
}
