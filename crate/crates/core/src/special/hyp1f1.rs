use super::gamma::ln_gamma;
use super::SpecialFnConfig;
use crate::error::{Error, Result};

/// Below this argument the direct series is used for negative `t`; further left the
/// Kummer transformation avoids alternating-sign cancellation.
const NEG_SERIES_LIMIT: f64 = -5.0;

fn is_nonpos_int(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Power series with compensated summation.
fn series(a: f64, b: f64, t: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    let mut sum = 1.0;
    let mut comp = 0.0;
    let mut term = 1.0;
    let mut biggest = 1.0f64;
    for k in 0..cfg.max_terms {
        let kf = k as f64;
        term *= (a + kf) / (b + kf) * t / (kf + 1.0);
        if term == 0.0 {
            return Ok(sum);
        }
        let y = term - comp;
        let s = sum + y;
        comp = (s - sum) - y;
        sum = s;
        biggest = biggest.max(term.abs());
        // past the hump the ratio of consecutive terms is < 1 and shrinking
        if term.abs() <= cfg.series_tol * sum.abs() && kf > (a.abs() + t.abs()) {
            if biggest > 1e12 * sum.abs() {
                return Err(Error::Precision(format!(
                    "1F1({a}, {b}; {t}) series cancels {:.1e}-fold",
                    biggest / sum.abs()
                )));
            }
            return Ok(sum);
        }
    }
    Err(Error::Precision(format!(
        "1F1({a}, {b}; {t}) series did not converge in {} terms",
        cfg.max_terms
    )))
}

/// Large-`t` expansion: returns `(ln|F| - t, sign)`.
fn asymptotic_scaled(a: f64, b: f64, t: f64, cfg: &SpecialFnConfig) -> Result<(f64, f64)> {
    let (lgb, sb) = ln_gamma(b)?;
    let (lga, sa) = ln_gamma(a)?;
    let mut sum = 1.0;
    let mut term = 1.0f64;
    for k in 0..cfg.max_terms {
        let kf = k as f64;
        let next = term * (b - a + kf) * (1.0 - a + kf) / ((kf + 1.0) * t);
        if next.abs() > term.abs() || next == 0.0 {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < cfg.series_tol * sum.abs() {
            break;
        }
    }
    let ln = lgb - lga + (a - b) * t.ln() + sum.abs().ln();
    Ok((ln, sb * sa * sum.signum()))
}

fn check_b(b: f64) -> Result<()> {
    if !b.is_finite() || is_nonpos_int(b) {
        return Err(Error::Domain(format!("1F1 has a pole at b = {b}")));
    }
    Ok(())
}

/// `e^{-max(t,0)} 1F1(a, b; t)`, representable for arbitrarily large `t`.
pub fn kummer_1f1_scaled(a: f64, b: f64, t: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    check_b(b)?;
    if t == 0.0 || a == 0.0 {
        return Ok(if t > 0.0 { (-t).exp() } else { 1.0 });
    }
    if t < NEG_SERIES_LIMIT {
        // 1F1(a,b;t) = e^t 1F1(b-a,b;-t)
        let inner = kummer_1f1_scaled(b - a, b, -t, cfg)?;
        return Ok(inner);
    }
    if t < cfg.asymptotic_switch || is_nonpos_int(a) {
        let s = series(a, b, t, cfg)?;
        return Ok(if t > 0.0 { s * (-t).exp() } else { s });
    }
    let (ln, sign) = asymptotic_scaled(a, b, t, cfg)?;
    Ok(sign * ln.exp())
}

/// Confluent hypergeometric function `1F1(a, b; t)`.
pub fn kummer_1f1(a: f64, b: f64, t: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    let scaled = kummer_1f1_scaled(a, b, t, cfg)?;
    if t <= 0.0 {
        return Ok(scaled);
    }
    let v = scaled * t.exp();
    if !v.is_finite() {
        return Err(Error::Precision(format!(
            "1F1({a}, {b}; {t}) overflows; use the scaled form"
        )));
    }
    Ok(v)
}

/// `d/dt 1F1(a, b; t) = (a/b) 1F1(a+1, b+1; t)`.
pub fn kummer_1f1_deriv(a: f64, b: f64, t: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    check_b(b)?;
    Ok(a / b * kummer_1f1(a + 1.0, b + 1.0, t, cfg)?)
}

/// Scaled derivative, same scaling as [`kummer_1f1_scaled`].
pub fn kummer_1f1_deriv_scaled(a: f64, b: f64, t: f64, cfg: &SpecialFnConfig) -> Result<f64> {
    check_b(b)?;
    Ok(a / b * kummer_1f1_scaled(a + 1.0, b + 1.0, t, cfg)?)
}
