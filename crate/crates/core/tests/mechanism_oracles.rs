//! Mechanism and analytic functionals checked against independent quadratures
//! and closed forms written out here.

use std::sync::Arc;

use fraglab::analytics::{contraction_routes, second_moment, solve_fixed_point, LaplaceArgs};
use fraglab::quadrature::{integrate, integrate_half_line, QuadConfig};
use fraglab::special::gamma;
use fraglab::{BranchingMechanism, General, Stable, Stable32, TiltedStable};

fn quad() -> QuadConfig<f64> {
    QuadConfig::with_tolerances(1e-18, 1e-13)
}

#[test]
fn tail_and_small_mass_match_quadrature() {
    for alpha in [1.1, 1.3, 1.5, 1.7, 1.9] {
        let m = Stable::new(alpha).unwrap();
        let k = 1.0 / (alpha * gamma(1.0 - 1.0 / alpha));
        for e in [-6, -5, -4, -3, -2, -1, 0] {
            let eps = 10f64.powi(e);
            let tail = integrate_half_line(|u| k * (eps + u).powf(-1.0 - 1.0 / alpha), &[eps, 1.0], &quad()).unwrap().value;
            let small = integrate(|r| k * r.powf(-1.0 / alpha), 0.0, eps, &quad()).unwrap().value;
            assert!((tail / m.pi_star_tail(eps).unwrap() - 1.0).abs() < 1e-9, "alpha {alpha} eps {eps}");
            assert!((small / m.phi_small_mass(eps).unwrap() - 1.0).abs() < 1e-9, "alpha {alpha} eps {eps}");
        }
    }
}

#[test]
fn stable_psi_is_its_levy_integral() {
    for alpha in [1.2, 1.5, 1.8] {
        let m = Stable::new(alpha).unwrap();
        let c = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
        for lam in [0.01, 0.5, 1.0, 3.0, 40.0] {
            let v = integrate_half_line(
                |l: f64| {
                    if l == 0.0 {
                        return 0.0;
                    }
                    let x = lam * l;
                    let rem_over_sq = if x < 1e-2 {
                        0.5 - x / 6.0 + x * x / 24.0 - x.powi(3) / 120.0 + x.powi(4) / 720.0
                    } else {
                        ((-x).exp_m1() + x) / (x * x)
                    };
                    c * rem_over_sq * lam * lam * l.powf(1.0 - alpha)
                },
                &[1.0 / lam],
                &quad(),
            )
            .unwrap()
            .value;
            assert!((v / m.psi(lam).unwrap() - 1.0).abs() < 1e-9, "alpha {alpha} lambda {lam}");
        }
    }
}

#[test]
fn inverses_round_trip() {
    let stable = Stable::new(1.4).unwrap();
    let alpha = 1.4;
    let c = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
    let general = General::new(0.0, Arc::new(move |l: f64| c * l.powf(-1.0 - alpha)), None, true).unwrap();
    for i in 0..=40 {
        let x = 100.0 * (i as f64 / 40.0).powi(2);
        let s = stable.psi_inverse(stable.psi(x).unwrap()).unwrap();
        assert!((s - x).abs() <= 1e-12 * (1.0 + x), "stable at {x}");
        let g = general.psi_inverse(general.psi(x).unwrap()).unwrap();
        assert!((g - x).abs() <= 1e-8 * (1.0 + x), "general at {x}: {g}");
    }
}

#[test]
fn general_mechanism_reproduces_stable() {
    for alpha in [1.25, 1.6] {
        let c = alpha * (alpha - 1.0) / gamma(2.0 - alpha);
        let g = General::new(0.0, Arc::new(move |l: f64| c * l.powf(-1.0 - alpha)), None, true).unwrap();
        for lam in [0.1, 1.0, 2.5, 10.0] {
            assert!((g.psi(lam).unwrap() / lam.powf(alpha) - 1.0).abs() < 1e-9);
            assert!((g.psi_prime(lam).unwrap() / (alpha * lam.powf(alpha - 1.0)) - 1.0).abs() < 1e-9);
            let second = alpha * (alpha - 1.0) * lam.powf(alpha - 2.0);
            assert!((g.psi_second(lam).unwrap() / second - 1.0).abs() < 1e-8);
        }
    }
}

#[test]
fn general_mechanism_with_drift_and_cutoff() {
    // Brownian-free compound mechanism: drift plus a finite Levy density on (0, 2).
    let g = General::new(0.5, Arc::new(|l: f64| (-l).exp()), Some(2.0), false).unwrap();
    for lam in [0.3, 1.0, 4.0] {
        let levy = integrate(|l| ((-lam * l).exp() - 1.0 + lam * l) * (-l).exp(), 0.0, 2.0, &quad()).unwrap().value;
        assert!((g.psi(lam).unwrap() - (0.5 * lam + levy)).abs() < 1e-12);
    }
}

#[test]
fn tilted_inverse_and_g_identity() {
    let t = TiltedStable::new(Stable::new(1.5).unwrap(), 2.0).unwrap();
    for v in [0.0, 0.2, 1.0, 7.0] {
        let x = t.psi_inverse(v).unwrap();
        assert!((t.psi(x).unwrap() - v).abs() < 1e-12 * (1.0 + v));
    }
    let a: f64 = 0.7;
    assert!((t.big_g(a).unwrap() - (2.7f64.powf(1.5) - a.powf(1.5) - 2f64.powf(1.5))).abs() < 1e-13);
}

#[test]
fn fixed_point_matches_direct_iteration() {
    // Independent iteration of c <- G(gamma + T(c + beta)) with plain quadrature.
    let (alpha, theta) = (1.5, 1.0);
    let t = TiltedStable::new(Stable::new(alpha).unwrap(), theta).unwrap();
    let k = 1.0 / (alpha * gamma(1.0 - 1.0 / alpha));
    let (x, y, g, beta, eps) = (0.3, 0.1, 0.2, 1.0, 0.05);
    let weight = |r: f64| if r > eps { x } else { y * r };
    let tt = |c: f64| {
        integrate_half_line(
            |r| -(-(weight(r) + c * r)).exp_m1() * (-r).exp() * k * r.powf(-1.0 - 1.0 / alpha),
            &[eps, 1.0],
            &quad(),
        )
        .unwrap()
        .value
    };
    let big_g = |a: f64| (theta + a).powf(alpha) - a.powf(alpha) - theta.powf(alpha);
    let mut c = 0.0;
    for _ in 0..500 {
        c = big_g(g + tt(c + beta));
    }
    let fp = solve_fixed_point(&t, &LaplaceArgs::new(x, y, g, beta, eps).unwrap()).unwrap();
    assert!((fp.c_prime - c).abs() < 1e-10, "{} vs {c}", fp.c_prime);
}

#[test]
fn second_moment_matches_finite_differences() {
    // conditional second moment = d^2/dh^2 of exp(-(beta + c'(h x, h y, h gamma)) s0) at h = 0.
    let t = TiltedStable::new(Stable::new(1.5).unwrap(), 1.0).unwrap();
    let (x, y, g, beta, eps, s0) = (0.4, 0.2, -0.3, 1.0, 0.01, 1.3);
    let f = |h: f64| {
        if h == 0.0 {
            let a0 = t.base().psi_inverse(beta).unwrap();
            return (-t.psi(a0).unwrap() * s0).exp();
        }
        let fp = solve_fixed_point(&t, &LaplaceArgs::new(h * x, h * y, h * g, beta, eps).unwrap()).unwrap();
        (-(beta + fp.c_prime) * s0).exp()
    };
    // one-sided stencil since x, y must stay nonnegative
    let h = 1e-3;
    let fd = (2.0 * f(0.0) - 5.0 * f(h) + 4.0 * f(2.0 * h) - f(3.0 * h)) / (h * h);
    let sm = second_moment(&t, &LaplaceArgs::new(x, y, g, beta, eps).unwrap(), s0).unwrap();
    assert!((sm.conditional / fd - 1.0).abs() < 1e-4, "{} vs {fd}", sm.conditional);
}

#[test]
fn contraction_routes_agree() {
    for alpha in [1.2, 1.5, 1.8] {
        let t = TiltedStable::new(Stable::new(alpha).unwrap(), 0.7).unwrap();
        for beta in [0.2, 1.0, 3.0] {
            let (q, c) = contraction_routes(&t, beta, 1e-3).unwrap();
            assert!((q - c).abs() < 1e-9, "alpha {alpha} beta {beta}: {q} vs {c}");
            assert!(q > 0.0 && q < 1.0);
        }
    }
}

#[test]
fn single_precision_mechanism() {
    let m = Stable32::new(1.5).unwrap();
    assert!((m.psi(4.0).unwrap() - 8.0).abs() < 1e-5);
    assert!((m.psi_inverse(8.0).unwrap() - 4.0).abs() < 1e-5);
    assert!((m.pi_star_tail(1.0).unwrap() as f64 - 1.0 / gamma(1.0 - 1.0 / 1.5)).abs() < 1e-5);
}
