use std::f64::consts::PI;

use super::gamma::temme_gammas;
use super::SpecialFnConfig;
use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const TEMME_XMAX: f64 = 2.0;

/// Modified Bessel functions of order `v` with exponential scaling:
/// `I_v(x) = i e^{x}`, `I_v'(x) = ip e^{x}`, `K_v(x) = k e^{-x}`, `K_v'(x) = kp e^{-x}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselIK {
    pub i: f64,
    pub ip: f64,
    pub k: f64,
    pub kp: f64,
}

fn asymptotic_switch(v: f64) -> f64 {
    30.0 + v * v
}

/// Hankel expansion, valid for `x` large against `v^2`.
fn hankel(v: f64, x: f64) -> BesselIK {
    let mu = 4.0 * v * v;
    // S_I = sum (-1)^k a_k x^-k, S_K = sum a_k x^-k, plus their x-derivatives
    let (mut si, mut sk, mut dsi, mut dsk) = (1.0, 1.0, 0.0, 0.0);
    let mut term = 1.0f64;
    for k in 1..60 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = term * (mu - odd * odd) / (kf * 8.0 * x);
        if next.abs() > term.abs() && k > 2 {
            break;
        }
        term = next;
        let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
        si += sign * term;
        sk += term;
        dsi -= sign * kf * term / x;
        dsk -= kf * term / x;
        if term.abs() < EPS {
            break;
        }
    }
    let ci = 1.0 / (2.0 * PI * x).sqrt();
    let ck = (PI / (2.0 * x)).sqrt();
    let half = 0.5 / x;
    BesselIK {
        i: ci * si,
        ip: ci * (si - half * si + dsi),
        k: ck * sk,
        kp: ck * (-sk - half * sk + dsk),
    }
}

/// `I_v, K_v` and derivatives for `v >= 0`, `x > 0` (Temme series for `K` at small `x`,
/// Steed's continued fraction at large `x`, `I` from the Wronskian).
pub fn bessel_ik(v: f64, x: f64, cfg: &SpecialFnConfig) -> Result<BesselIK> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("Bessel order must be >= 0, got {v}")));
    }
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::Domain(format!("Bessel argument must be > 0, got {x}")));
    }
    if x > asymptotic_switch(v) {
        return Ok(hankel(v, x));
    }
    let nl = (v + 0.5).floor() as usize;
    let xmu = v - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // CF1: I_v'/I_v
    let mut h = (v * xi).max(FPMIN);
    let mut b = xi2 * v;
    let mut d = 0.0;
    let mut c = h;
    let mut converged = false;
    for _ in 0..cfg.max_terms {
        b += xi2;
        d = 1.0 / (b + d);
        c = b + 1.0 / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Precision(format!("Bessel CF1 failed at v={v}, x={x}")));
    }

    // downward recurrence to order mu
    let mut ril = FPMIN;
    let mut ripl = h * ril;
    let ril1 = ril;
    let rip1 = ripl;
    let mut fact = v * xi;
    for _ in 0..nl {
        let ritemp = fact * ril + ripl;
        fact -= xi;
        ripl = fact * ritemp + ril;
        ril = ritemp;
    }
    let f = ripl / ril;

    // K_mu, K_{mu+1}, scaled by e^{x}
    let (rkmu, rk1) = if x < TEMME_XMAX {
        let x2 = 0.5 * x;
        let pimu = PI * xmu;
        let fact = if pimu.abs() < EPS { 1.0 } else { pimu / pimu.sin() };
        let dd = -x2.ln();
        let e = xmu * dd;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * dd);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut cc = 1.0;
        let d2 = x2 * x2;
        let mut sum1 = p;
        let mut ok = false;
        for i in 1..cfg.max_terms {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            cc *= d2 / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = cc * ff;
            sum += del;
            sum1 += cc * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Precision(format!("Bessel K series failed at v={v}, x={x}")));
        }
        let ex = x.exp();
        (sum * ex, sum1 * xi2 * ex)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut ok = false;
        for i in 2..cfg.max_terms {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Precision(format!("Bessel CF2 failed at v={v}, x={x}")));
        }
        let h = a1 * h;
        let rkmu = (PI / (2.0 * x)).sqrt() / s;
        (rkmu, rkmu * (xmu + x + 0.5 - h) * xi)
    };

    let rkmup = xmu * xi * rkmu - rk1;
    // Wronskian I K' - I' K = -1/x; with the scalings above I comes out scaled by e^{-x}
    let rimu = xi / (f * rkmu - rkmup);
    let ri = rimu * ril1 / ril;
    let rip = rimu * rip1 / ril;
    let (mut km, mut k1) = (rkmu, rk1);
    for i in 1..=nl {
        let t = (xmu + i as f64) * xi2 * k1 + km;
        km = k1;
        k1 = t;
    }
    Ok(BesselIK {
        i: ri,
        ip: rip,
        k: km,
        kp: v * xi * km - k1,
    })
}

/// Scaled `I_{-v}(x) e^{-x}` and its derivative for non-integer `v > 0`, from
/// `I_{-v} = I_v + (2/pi) sin(v pi) K_v`.
pub fn bessel_i_neg_scaled(v: f64, x: f64, cfg: &SpecialFnConfig) -> Result<(f64, f64)> {
    if v == v.floor() {
        return Err(Error::Degenerate(format!(
            "I_(-v) coincides with I_v for integer order {v}"
        )));
    }
    let ik = bessel_ik(v, x, cfg)?;
    let w = 2.0 / PI * (PI * v).sin() * (-2.0 * x).exp();
    Ok((ik.i + w * ik.k, ik.ip + w * ik.kp))
}

/// Half-integer orders `v = +-(m + 1/2)`, `m in {0, 1, 2}`, in closed cosh/sinh form,
/// scaled by `e^{-x}`. Returns `(I, I')`.
pub fn bessel_i_half_integer_scaled(v: f64, x: f64) -> Result<(f64, f64)> {
    let m = v.abs() - 0.5;
    if m != m.floor() || m > 2.0 {
        return Err(Error::Domain(format!("no closed form for order {v}")));
    }
    let e2 = (-2.0 * x).exp();
    let sh = 0.5 * (1.0 - e2);
    let ch = 0.5 * (1.0 + e2);
    let (s, c) = if v > 0.0 { (sh, ch) } else { (ch, sh) };
    // g(x) = sqrt(2/(pi x)) * P(x) where P is the bracket below; P' uses (sinh)' = cosh
    let (p, dp) = match m as u32 {
        0 => (s, c),
        1 => (c - s / x, s - c / x + s / (x * x)),
        _ => {
            let p = (1.0 + 3.0 / (x * x)) * s - 3.0 * c / x;
            let dp = -6.0 / (x * x * x) * s + (1.0 + 3.0 / (x * x)) * c - 3.0 * s / x + 3.0 * c / (x * x);
            (p, dp)
        }
    };
    let pre = (2.0 / (PI * x)).sqrt();
    Ok((pre * p, pre * (dp - p / (2.0 * x))))
}

/// Unscaled pair `(I_v(z), K_v(z))`. Fails where `e^{z}` would overflow; callers that
/// need large arguments use [`bessel_ik`], which carries the exponent separately.
pub fn bessel_basis(v: f64, z: f64, cfg: &SpecialFnConfig) -> Result<(f64, f64)> {
    if z > 700.0 {
        return Err(Error::Precision(format!(
            "I_v({z}) overflows; use the scaled representation"
        )));
    }
    let m = v - 0.5;
    if m == m.floor() && (0.0..=2.0).contains(&m) {
        let (i, _) = bessel_i_half_integer_scaled(v, z)?;
        let ik = bessel_ik(v, z, cfg)?;
        return Ok((i * z.exp(), ik.k * (-z).exp()));
    }
    let ik = bessel_ik(v, z, cfg)?;
    Ok((ik.i * z.exp(), ik.k * (-z).exp()))
}
