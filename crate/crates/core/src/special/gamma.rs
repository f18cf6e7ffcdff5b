use std::f64::consts::PI;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Taylor coefficients of `1/Gamma(1+x)` about 0.
const RECIP_GAMMA_1P: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

fn is_pole(z: f64) -> bool {
    z <= 0.0 && z == z.floor()
}

fn lanczos_sum(z: f64) -> f64 {
    // z already shifted by -1
    let mut x = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    x
}

/// `ln|Gamma(z)|` and the sign of `Gamma(z)`.
pub fn ln_gamma(z: f64) -> Result<(f64, f64)> {
    if !z.is_finite() || is_pole(z) {
        return Err(Error::Domain(format!("Gamma has a pole at z = {z}")));
    }
    if z < 0.5 {
        // reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
        let s = (PI * z).sin();
        let (lg, sg) = ln_gamma(1.0 - z)?;
        return Ok(((PI / s.abs()).ln() - lg, s.signum() * sg));
    }
    let zm = z - 1.0;
    let t = zm + LANCZOS_G + 0.5;
    let lg = 0.5 * (2.0 * PI).ln() + (zm + 0.5) * t.ln() - t + lanczos_sum(zm).ln();
    Ok((lg, 1.0))
}

/// `Gamma(z)` for real `z` away from the poles.
pub fn gamma_fn(z: f64) -> Result<f64> {
    if !z.is_finite() || is_pole(z) {
        return Err(Error::Domain(format!("Gamma has a pole at z = {z}")));
    }
    if z < 0.5 {
        return Ok(PI / ((PI * z).sin() * gamma_fn(1.0 - z)?));
    }
    if z > 140.0 {
        let (lg, _) = ln_gamma(z)?;
        return Ok(lg.exp());
    }
    let zm = z - 1.0;
    let t = zm + LANCZOS_G + 0.5;
    // split the power so t^(zm+0.5) does not overflow before e^{-t} shrinks it
    let half = t.powf(0.5 * (zm + 0.5));
    Ok((2.0 * PI).sqrt() * half * (half * (-t).exp()) * lanczos_sum(zm))
}

/// Temme's auxiliary pair for `|mu| <= 1/2`:
/// `gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)` and
/// `gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2`, plus both reciprocals.
pub(crate) fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut odd = 0.0;
    let mut even = 0.0;
    for (j, c) in RECIP_GAMMA_1P.iter().enumerate().rev() {
        if j % 2 == 1 {
            odd = odd * mu * mu + c;
        } else {
            even = even * mu * mu + c;
        }
    }
    // 1/Gamma(1+mu) = even + mu*odd, 1/Gamma(1-mu) = even - mu*odd
    let gam1 = -odd;
    let gam2 = even;
    (gam1, gam2, even + mu * odd, even - mu * odd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn classical_values() {
        assert!((gamma_fn(5.0).unwrap() - 24.0).abs() < 24.0 * 1e-14);
        assert!((gamma_fn(0.5).unwrap() - PI.sqrt()).abs() < 1e-14);
        assert!((gamma_fn(-0.5).unwrap() + 2.0 * PI.sqrt()).abs() < 1e-13);
        let f49: f64 = (1..50).map(|k| k as f64).product();
        assert!((gamma_fn(50.0).unwrap() / f49 - 1.0).abs() < 1e-12);
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-3.0).is_err());
    }

    #[test]
    fn ln_gamma_matches() {
        for &z in &[0.1, 0.7, 3.3, 12.5, -0.854, -2.5] {
            let (lg, sg) = ln_gamma(z).unwrap();
            let g = gamma_fn(z).unwrap();
            assert!((sg * lg.exp() / g - 1.0).abs() < 1e-12, "z = {z}");
        }
    }

    #[test]
    fn temme_pair() {
        let (g1, g2, gp, gm) = temme_gammas(0.0);
        assert!((g1 + 0.577_215_664_901_532_9).abs() < 1e-15);
        assert!((g2 - 1.0).abs() < 1e-15 && gp == gm);
        let mu = 0.3;
        let (g1, g2, gp, gm) = temme_gammas(mu);
        let ip = 1.0 / gamma_fn(1.0 + mu).unwrap();
        let im = 1.0 / gamma_fn(1.0 - mu).unwrap();
        assert!((gp - ip).abs() < 1e-14 && (gm - im).abs() < 1e-14);
        assert!((g1 - (im - ip) / (2.0 * mu)).abs() < 1e-13);
        assert!((g2 - (im + ip) / 2.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn recurrence(z in 0.001f64..10.0) {
            let r = gamma_fn(z + 1.0).unwrap() / (z * gamma_fn(z).unwrap());
            prop_assert!((r - 1.0).abs() < 1e-12);
        }
    }
}
