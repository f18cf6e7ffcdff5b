//! Low-degree polynomial roots. Closed forms followed by Newton polishing on the
//! polynomial itself; callers polish again against their own function when the
//! polynomial is a cleared-denominator form.

/// Roots of a polynomial of degree <= 3 with real coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyRoots {
    /// Real roots, ascending.
    pub real: Vec<f64>,
    /// Complex conjugate pair `(re, im)` with `im > 0`, if any.
    pub complex: Option<(f64, f64)>,
}

impl PolyRoots {
    /// Real parts of all roots, descending.
    pub fn real_parts_desc(&self) -> Vec<f64> {
        let mut v = self.real.clone();
        if let Some((re, _)) = self.complex {
            v.push(re);
            v.push(re);
        }
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        v
    }
}

/// `a x^2 + b x + c = 0` using the cancellation-free form.
pub fn solve_quadratic(a: f64, b: f64, c: f64) -> PolyRoots {
    if a == 0.0 {
        let real = if b != 0.0 { vec![-c / b] } else { vec![] };
        return PolyRoots { real, complex: None };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return PolyRoots {
            real: vec![],
            complex: Some((-b / (2.0 * a), (-disc).sqrt() / (2.0 * a).abs())),
        };
    }
    let sq = disc.sqrt();
    let qq = -0.5 * (b + b.signum() * sq);
    let mut real = if qq == 0.0 {
        vec![0.0, 0.0]
    } else {
        vec![qq / a, c / qq]
    };
    real.sort_by(|x, y| x.partial_cmp(y).unwrap());
    PolyRoots { real, complex: None }
}

/// `a x^3 + b x^2 + c x + d = 0`.
pub fn solve_cubic(a: f64, b: f64, c: f64, d: f64) -> PolyRoots {
    if a == 0.0 {
        return solve_quadratic(b, c, d);
    }
    let (p, q, r) = (b / a, c / a, d / a);
    let qq = (p * p - 3.0 * q) / 9.0;
    let rr = (2.0 * p * p * p - 9.0 * p * q + 27.0 * r) / 54.0;
    let horner = |x: f64| ((x + p) * x + q) * x + r;
    let dhorner = |x: f64| (3.0 * x + 2.0 * p) * x + q;
    let polish = |mut x: f64| {
        for _ in 0..3 {
            let dx = dhorner(x);
            if dx == 0.0 {
                break;
            }
            let step = horner(x) / dx;
            if !step.is_finite() {
                break;
            }
            x -= step;
        }
        x
    };

    if rr * rr < qq * qq * qq {
        let theta = (rr / (qq * qq * qq).sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * qq.sqrt();
        let tau = std::f64::consts::TAU;
        let mut real: Vec<f64> = [theta, theta + tau, theta - tau]
            .iter()
            .map(|t| polish(m * (t / 3.0).cos() - p / 3.0))
            .collect();
        real.sort_by(|x, y| x.partial_cmp(y).unwrap());
        PolyRoots { real, complex: None }
    } else {
        let big_a = -rr.signum() * (rr.abs() + (rr * rr - qq * qq * qq).sqrt()).cbrt();
        let big_b = if big_a != 0.0 { qq / big_a } else { 0.0 };
        let x0 = polish(big_a + big_b - p / 3.0);
        // deflate: x^2 + (p + x0) x + (q + x0 (p + x0))
        let rest = solve_quadratic(1.0, p + x0, q + x0 * (p + x0));
        let mut real = vec![x0];
        real.extend(rest.real.iter().map(|&x| polish(x)));
        real.sort_by(|x, y| x.partial_cmp(y).unwrap());
        PolyRoots {
            real,
            complex: rest.complex,
        }
    }
}
