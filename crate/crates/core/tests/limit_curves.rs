use nearcrit::limits::{
    lambda_beta, mu_alpha, mu_beta, nu_alpha, nu_over_a, phi, phi_star, pi_alpha, CurveKind, DriftParam, LimitCurves,
};

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// ∫_0^t u^p e^{c(t-u)} du for integer p, by repeated integration by parts.
fn weighted_power(p: u32, c: f64, t: f64) -> f64 {
    if c == 0.0 {
        return t.powi(p as i32 + 1) / f64::from(p + 1);
    }
    let partial: f64 = (0..=p).map(|k| (c * t).powi(k as i32) / factorial(k)).sum();
    factorial(p) / c.powi(p as i32 + 1) * ((c * t).exp() - partial)
}

fn closed_nu_over_a(alpha: u32, a: f64, t: f64) -> f64 {
    if a == 0.0 {
        let al = f64::from(alpha);
        return t.powf(al + 2.0) / ((al + 1.0) * (al + 2.0));
    }
    (weighted_power(alpha, 2.0 * a, t) - weighted_power(alpha, a, t)) / a
}

const TIMES: [f64; 5] = [0.1, 0.25, 0.5, 0.9, 1.0];

#[test]
fn curves_match_integer_closed_forms() {
    for alpha in 0u32..=2 {
        for a in [-1.0, 0.0, 1.0] {
            let beta = alpha;
            let p = DriftParam::new(a, f64::from(alpha), f64::from(beta)).unwrap();
            let norm = closed_nu_over_a(alpha, a, 1.0);
            for t in TIMES {
                let mu = weighted_power(alpha, a, t);
                assert!((mu_alpha(&p, t).unwrap() - mu).abs() < 1e-8, "mu a={a} alpha={alpha} t={t}");
                let nu = weighted_power(alpha, a, t) - weighted_power(alpha, 2.0 * a, t);
                assert!((nu_alpha(&p, t).unwrap() - nu).abs() < 1e-8, "nu a={a} alpha={alpha} t={t}");
                let nua = closed_nu_over_a(alpha, a, t);
                assert!((nu_over_a(&p, t).unwrap() - nua).abs() < 1e-8);
                let lam = weighted_power(beta, 2.0 * a, t);
                assert!((lambda_beta(&p, t).unwrap() - lam).abs() < 1e-8);
                assert!((mu_beta(&p, t).unwrap() - weighted_power(beta, a, t)).abs() < 1e-8);
                let ph = nua / norm;
                assert!((phi(&p, t).unwrap() - ph).abs() < 1e-8, "phi a={a} alpha={alpha} t={t}");
                // ∫_0^t mu(u) e^{-2au} du = e^{-2at} nu_over_a(t)
                let ps = (-2.0 * a * t).exp() * nua / norm;
                assert!((phi_star(&p, t).unwrap() - ps).abs() < 1e-8, "phi* a={a} alpha={alpha} t={t}");
                let pi = mu / weighted_power(alpha, a, 1.0);
                assert!((pi_alpha(&p, t).unwrap() - pi).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn memoised_curves_agree_with_direct_evaluation() {
    let p = DriftParam::new(1.0, 1.0, 1.0).unwrap();
    let curves = LimitCurves::new(p);
    for t in TIMES {
        let ph = closed_nu_over_a(1, 1.0, t) / closed_nu_over_a(1, 1.0, 1.0);
        assert!((curves.eval(CurveKind::Phi, t).unwrap() - ph).abs() < 1e-8);
        assert!((curves.eval(CurveKind::PhiStar, t).unwrap() - (-2.0 * t).exp() * ph).abs() < 1e-8);
    }
}

#[test]
fn curves_are_continuous_at_zero_drift() {
    for alpha in [0.0, 0.5, 1.0, 2.0] {
        let crit = DriftParam::new(0.0, alpha, alpha).unwrap();
        for a in [-1e-6, 1e-6] {
            let p = DriftParam::new(a, alpha, alpha).unwrap();
            for t in TIMES {
                assert!((mu_alpha(&p, t).unwrap() - mu_alpha(&crit, t).unwrap()).abs() < 1e-4);
                assert!((nu_over_a(&p, t).unwrap() - nu_over_a(&crit, t).unwrap()).abs() < 1e-4);
                assert!((lambda_beta(&p, t).unwrap() - lambda_beta(&crit, t).unwrap()).abs() < 1e-4);
                assert!((phi(&p, t).unwrap() - phi(&crit, t).unwrap()).abs() < 1e-4);
                assert!((phi_star(&p, t).unwrap() - phi_star(&crit, t).unwrap()).abs() < 1e-4);
            }
        }
    }
}

#[test]
fn pi_is_monotone_from_zero_to_one() {
    let p = DriftParam::new(0.0, 1.0, 1.0).unwrap();
    let curve = LimitCurves::new(p).sample(CurveKind::PiAlpha, 1.0, 50).unwrap();
    assert_eq!(curve.first().unwrap().1, 0.0);
    assert_eq!(curve.last().unwrap().1, 1.0);
    assert!(curve.windows(2).all(|w| w[1].1 > w[0].1));
}
