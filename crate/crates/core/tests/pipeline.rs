use omega_put::closed_forms::{bessel_scale_lambda0, bs_put_value, c_lambda0, c_sigma0, Branch};
use omega_put::discount::DiscountFunction::{self, *};
use omega_put::omega::{build_ode, taylor_integrate, PassageProfile, TaylorConfig};
use omega_put::pricer::{candidate_value, optimize_boundary, value_curve, AlphaSchedule, Machinery};
use omega_put::{psi_roots, ModelParams};
use proptest::prelude::*;

const K: f64 = 20.0;

fn model(sigma: f64, lambda: f64) -> ModelParams {
    ModelParams::new(0.05, sigma, lambda, 2.0, K).unwrap()
}

fn machinery(p: ModelParams, d: DiscountFunction, s_max: f64) -> Machinery {
    Machinery::new(p, d, TaylorConfig::default(), AlphaSchedule::default(), s_max).unwrap()
}

#[test]
fn ratio_constants_are_pinned() {
    let p3 = model(0.2, 0.0);
    let p2 = model(0.0, 6.0);
    let cases = [
        (c_lambda0(&Linear { c: 0.1 }, &p3).unwrap(), 6.654879952633867e-2),
        (c_lambda0(&Linear { c: 0.4 }, &p3).unwrap(), 1.1044832313923197e-1),
        (c_sigma0(&Linear { c: 0.1 }, &p2).unwrap(), 1.835083391302e-1),
        (c_sigma0(&Power { c: 0.1, n: 0.5 }, &p2).unwrap(), 1.355933094323e-1),
    ];
    for (got, want) in cases {
        assert!((got / want - 1.0).abs() < 1e-11, "{got} vs {want}");
    }
}

#[test]
fn profile_constant_matches_closed_form() {
    let p3 = model(0.2, 0.0);
    let d = Linear { c: 0.1 };
    let prof = PassageProfile::new(&build_ode(&d, &p3, 0.0, 1.0).unwrap(), &TaylorConfig::default(), 3.0).unwrap();
    let want = c_lambda0(&d, &p3).unwrap();
    assert!((prof.c / want - 1.0).abs() < 1e-8);
}

#[test]
fn tilted_bessel_matches_taylor() {
    let p3 = model(0.2, 0.0);
    let d = Power { c: 0.1, n: 0.5 };
    for alpha in [1.0, 2.0] {
        let sol = taylor_integrate(&build_ode(&d, &p3, alpha, 1.0).unwrap(), 3.0, &TaylorConfig::default()).unwrap();
        let w = bessel_scale_lambda0(&d, &p3, alpha, Branch::W).unwrap();
        let z = bessel_scale_lambda0(&d, &p3, alpha, Branch::Z).unwrap();
        for i in 1..=30 {
            let x = 0.1 * i as f64;
            assert!((sol.w(x) / w.value(x).unwrap() - 1.0).abs() < 1e-5, "alpha {alpha} x {x}");
            assert!((sol.z(x) / z.value(x).unwrap() - 1.0).abs() < 1e-5, "alpha {alpha} x {x}");
        }
    }
}

#[test]
fn black_scholes_across_rates() {
    let p = model(0.3, 0.0);
    for q in [0.02, 0.1, 0.4] {
        let m = machinery(p, Constant { q }, 3.0 * K);
        let grid: Vec<f64> = (1..=30).map(|i| 2.0 * i as f64).collect();
        let vc = value_curve(&grid, K, &m).unwrap();
        let (_, u) = bs_put_value(K, &p, q).unwrap();
        assert!((vc.u_star - u).abs() < 1e-4, "q {q}");
        for (s, v) in grid.iter().zip(&vc.values) {
            let want = bs_put_value(*s, &p, q).unwrap().0;
            assert!((v - want).abs() <= 1e-4 * want.max(1e-3), "q {q} s {s}: {v} vs {want}");
        }
    }
}

// Far above the boundary the lambda = 0 value falls off faster than any jump term, so a
// relative match on the whole of [u*, 3K] cannot hold at any fixed small lambda.
#[test]
#[ignore = "first-order jump term dominates the diffusive tail past s ~ 50"]
fn vanishing_jumps_approach_the_diffusion_regime() {
    let d = Linear { c: 0.1 };
    let grid: Vec<f64> = (0..=40).map(|i| 16.0 + i as f64 * 1.1).collect();
    let full = value_curve(&grid, K, &machinery(model(0.2, 1e-8), d, 3.0 * K)).unwrap();
    let diff = value_curve(&grid, K, &machinery(model(0.2, 0.0), d, 3.0 * K)).unwrap();
    assert!((full.u_star - diff.u_star).abs() < 1e-3 * K);
    for i in 0..grid.len() {
        if grid[i] < diff.u_star {
            continue;
        }
        let (a, b) = (full.values[i], diff.values[i]);
        assert!((a - b).abs() <= 5e-3 * b, "s {}: {a} vs {b}", grid[i]);
    }
}

#[test]
fn jump_correction_is_linear_in_lambda() {
    let d = Linear { c: 0.1 };
    let m0 = machinery(model(0.2, 0.0), d, 3.0 * K);
    let u = optimize_boundary(K, &m0).unwrap().u_star;
    for s in [1.5 * K, 2.25 * K, 3.0 * K] {
        let v0 = candidate_value(s, u, &m0).unwrap();
        let d1 = candidate_value(s, u, &machinery(model(0.2, 1e-8), d, 3.0 * K)).unwrap() - v0;
        let d2 = candidate_value(s, u, &machinery(model(0.2, 2e-8), d, 3.0 * K)).unwrap() - v0;
        assert!(d1 > 0.0 && (d2 / d1 - 2.0).abs() < 1e-4, "s {s}: {d1} {d2}");
    }
}

#[test]
fn value_decays_without_jumps() {
    let p = model(0.2, 0.0);
    let m = machinery(p, Constant { q: 0.1 }, 10.0 * K);
    let u = optimize_boundary(K, &m).unwrap().u_star;
    let ratio = candidate_value(10.0 * K, u, &m).unwrap() / candidate_value(K, u, &m).unwrap();
    assert!(ratio <= 0.05, "{ratio}");
}

/// Far from the boundary a constant-rate value behaves like `s^gamma`, with `gamma` the
/// largest negative root of `psi = q`.
#[test]
fn jump_model_tail_follows_the_negative_root() {
    let p = model(0.2, 6.0);
    let q = 0.3;
    let m = machinery(p, Constant { q }, 40.0 * K);
    let u = optimize_boundary(K, &m).unwrap().u_star;
    let gamma = psi_roots(q, &p).unwrap().roots.into_iter().filter(|g| *g < 0.0).fold(f64::NEG_INFINITY, f64::max);
    let (s1, s2) = (20.0 * K, 40.0 * K);
    let slope = (candidate_value(s2, u, &m).unwrap() / candidate_value(s1, u, &m).unwrap()).ln() / 2f64.ln();
    assert!((slope - gamma).abs() < 1e-3, "{slope} vs {gamma}");
}

#[test]
fn higher_rate_lowers_the_value() {
    let p = model(0.2, 6.0);
    let mut last = f64::INFINITY;
    for q in [0.3, 0.6, 0.9] {
        let m = machinery(p, Constant { q }, 3.0 * K);
        let u = optimize_boundary(K, &m).unwrap().u_star;
        let v = candidate_value(K, u, &m).unwrap();
        assert!(v <= last, "q {q}");
        last = v;
    }
}

#[test]
fn alpha_schedule_reproduces_the_classical_creeping_term() {
    let p = model(0.2, 6.0);
    let classical = machinery(p, Constant { q: 0.5 }, 3.0 * K);
    let numeric = machinery(p, Constant { q: 0.5 }, 3.0 * K).with_ode_path();
    let u = 9.0;
    for s in [10.0, 14.0, 25.0, 50.0] {
        let a = candidate_value(s, u, &classical).unwrap();
        let b = candidate_value(s, u, &numeric).unwrap();
        assert!((a - b).abs() <= 1e-2 * a, "s {s}: {a} vs {b}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn candidates_lie_between_zero_and_strike(u in 2.0f64..19.0, r in 1.0f64..4.0, q in 0.02f64..1.0) {
        let m = machinery(model(0.25, 3.0), Constant { q }, 4.0 * K);
        let v = candidate_value(u * r, u, &m).unwrap();
        prop_assert!(v >= 0.0 && v <= K);
    }

    #[test]
    fn optimised_value_dominates_other_thresholds(c in 0.05f64..0.5, frac in 0.1f64..0.9) {
        let m = machinery(model(0.0, 6.0), Linear { c }, 3.0 * K);
        let u = optimize_boundary(K, &m).unwrap().u_star;
        let other = frac * K;
        prop_assert!(candidate_value(K, u, &m).unwrap() >= candidate_value(K, other, &m).unwrap() - 1e-9 * K);
    }
}
