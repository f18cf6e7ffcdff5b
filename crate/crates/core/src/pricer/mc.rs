//! Monte Carlo estimate of `E_s[e^{-int_0^tau omega(S_w) dw} (K - S_tau)]` for the first
//! entry `tau` of `S` into `(0, u]`.
//!
//! Without diffusion the path between jumps is a deterministic drift line, so the discount
//! integral and the passage are exact. With diffusion the log-price increments are exact
//! Gaussians on an adaptive grid; passages between grid points are caught with the
//! Brownian-bridge crossing probability, and the grid refines to `dt` near the barrier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discount::DiscountFunction;
use crate::error::{Error, Result};
use crate::levy::ModelParams;

/// Paths whose accumulated discount falls below this are stopped; their remaining value
/// is at most this times `K` and is booked in the tail bound.
const NEGLIGIBLE_DISCOUNT: f64 = 1e-13;
/// Two-sided 99% normal quantile.
const Z99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
}

fn default_t_max() -> f64 {
    200.0
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 100_000,
            dt: 1e-3,
            seed: 1,
            t_max: default_t_max(),
        }
    }
}

impl McConfig {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        if self.n_paths < 10_000 {
            return Err(Error::param("mc.n_paths", "needs at least 10^4 paths"));
        }
        if !(self.dt > 0.0) || (params.has_diffusion() && self.dt > 1e-3) {
            return Err(Error::param("mc.dt", "must be positive, and at most 1e-3 with diffusion"));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return Err(Error::param("mc.t_max", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    /// 99% half-width plus the truncation bound.
    pub ci_halfwidth: f64,
    pub std_error: f64,
    /// Fraction of paths stopped at `t_max` or by negligible discount.
    pub cap_fraction: f64,
    /// Upper bound on the value carried by stopped paths.
    pub tail_bound: f64,
    /// The tail bound is a noticeable part of the half-width.
    pub widened: bool,
}

struct PathOutcome {
    value: f64,
    tail: f64,
}

struct Sim<'a> {
    p: &'a ModelParams,
    d: &'a DiscountFunction,
    cfg: &'a McConfig,
    b: f64,
    k: f64,
    dt_max: f64,
}

impl Sim<'_> {
    fn stop(&self, x: f64, integral: f64) -> PathOutcome {
        PathOutcome {
            value: (-integral).exp() * (self.k - x.exp()),
            tail: 0.0,
        }
    }

    fn truncated(&self, integral: f64) -> PathOutcome {
        PathOutcome {
            value: 0.0,
            tail: (-integral).exp() * self.k,
        }
    }

    /// `int_0^tau xi(x + zeta t) dt`.
    fn drift_integral(&self, x: f64, tau: f64) -> f64 {
        let z = self.p.zeta;
        if z == 0.0 {
            self.d.xi(x) * tau
        } else {
            self.d.xi_integral(x, x + z * tau) / z
        }
    }

    fn pure_jump(&self, rng: &mut ChaCha8Rng, x0: f64) -> PathOutcome {
        let jump_time = Exp::new(self.p.lambda).expect("lambda > 0");
        let jump_size = Exp::new(self.p.phi).expect("phi > 0");
        let z = self.p.zeta;
        let (mut x, mut t, mut integral) = (x0, 0.0, 0.0);
        loop {
            let mut tau: f64 = jump_time.sample(rng);
            let capped = t + tau >= self.cfg.t_max;
            if capped {
                tau = self.cfg.t_max - t;
            }
            if z < 0.0 {
                let hit = (x - self.b) / -z;
                if hit <= tau {
                    integral += self.drift_integral(x, hit);
                    return self.stop(self.b, integral);
                }
            }
            integral += self.drift_integral(x, tau);
            x += z * tau;
            t += tau;
            if capped || (-integral).exp() < NEGLIGIBLE_DISCOUNT {
                return self.truncated(integral);
            }
            x -= jump_size.sample(rng);
            if x <= self.b {
                return self.stop(x, integral);
            }
        }
    }

    fn diffusive(&self, rng: &mut ChaCha8Rng, x0: f64) -> PathOutcome {
        let (sigma, z) = (self.p.sigma, self.p.zeta);
        let jump_time = self.p.has_jumps().then(|| Exp::new(self.p.lambda).expect("lambda > 0"));
        let jump_size = Exp::new(self.p.phi).expect("phi > 0");
        let next_jump = |rng: &mut ChaCha8Rng, t: f64| match &jump_time {
            Some(e) => t + e.sample(rng),
            None => f64::INFINITY,
        };
        let (mut x, mut t, mut integral) = (x0, 0.0, 0.0);
        let mut t_jump = next_jump(rng, 0.0);
        let mut xi_x = self.d.xi(x);
        loop {
            let dist = x - self.b;
            let mut h = (dist / (4.0 * sigma)).powi(2).clamp(self.cfg.dt, self.dt_max);
            h = h.min(t_jump - t).min(self.cfg.t_max - t);
            let n: f64 = StandardNormal.sample(rng);
            let x1 = x + z * h + sigma * h.sqrt() * n;
            let crossed = x1 <= self.b || {
                let p = (-2.0 * dist * (x1 - self.b) / (sigma * sigma * h)).exp();
                rng.random::<f64>() < p
            };
            if crossed {
                // crossing time unknown within the step; take the midpoint
                integral += 0.25 * h * (xi_x + self.d.xi(self.b));
                return self.stop(self.b, integral);
            }
            let xi_1 = self.d.xi(x1);
            integral += 0.5 * h * (xi_x + xi_1);
            x = x1;
            xi_x = xi_1;
            t += h;
            if t >= self.cfg.t_max || (-integral).exp() < NEGLIGIBLE_DISCOUNT {
                return self.truncated(integral);
            }
            if t >= t_jump {
                x -= jump_size.sample(rng);
                if x <= self.b {
                    return self.stop(x, integral);
                }
                xi_x = self.d.xi(x);
                t_jump = next_jump(rng, t);
            }
        }
    }
}

/// Estimate of the value of stopping at the first entry into `(0, u]`, started at `s`.
pub fn mc_estimate(
    s: f64,
    u: f64,
    params: &ModelParams,
    discount: &DiscountFunction,
    cfg: &McConfig,
) -> Result<McEstimate> {
    cfg.validate(params)?;
    let k = params.strike;
    if s <= u {
        return Ok(McEstimate {
            mean: k - s,
            ci_halfwidth: 0.0,
            std_error: 0.0,
            cap_fraction: 0.0,
            tail_bound: 0.0,
            widened: false,
        });
    }
    let sim = Sim {
        p: params,
        d: discount,
        cfg,
        b: u.ln(),
        k,
        dt_max: if discount.is_constant() { 1.0 } else { (50.0 * cfg.dt).min(0.05) },
    };
    let x0 = s.ln();
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i);
            if params.has_diffusion() {
                sim.diffusive(&mut rng, x0)
            } else {
                sim.pure_jump(&mut rng, x0)
            }
        })
        .collect();
    let n = outcomes.len() as f64;
    let (mut sum, mut sum2, mut tail, mut capped) = (0.0, 0.0, 0.0, 0usize);
    for o in &outcomes {
        sum += o.value;
        sum2 += o.value * o.value;
        if o.tail > 0.0 {
            tail += o.tail;
            capped += 1;
        }
    }
    let mean = sum / n;
    let var = ((sum2 / n - mean * mean) * n / (n - 1.0)).max(0.0);
    let se = (var / n).sqrt();
    let tail_bound = tail / n;
    let stat = Z99 * se;
    Ok(McEstimate {
        mean,
        ci_halfwidth: stat + tail_bound,
        std_error: se,
        cap_fraction: capped as f64 / n,
        tail_bound,
        widened: tail_bound > 0.1 * stat,
    })
}
