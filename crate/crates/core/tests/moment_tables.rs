use nearcrit::limits::DriftParam;
use nearcrit::moments::{
    geom_ratio, lemma4_check, lemma5_check, lemma6_check, mean_a, var_tables, ImmigrationFns, Normalizers,
    OffspringFns,
};
use nearcrit::regvar::RegVarSeq;
use proptest::prelude::*;

fn kahan_geom(a: f64, j: usize) -> f64 {
    let (mut sum, mut comp, mut power) = (0.0f64, 0.0f64, 1.0f64);
    for _ in 0..j {
        let y = power - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        power *= a;
    }
    sum
}

#[test]
fn geom_ratio_near_one_matches_compensated_sum() {
    let a = 1.0 + 1e-9;
    let j = 1_000_000;
    let direct = kahan_geom(a, j);
    assert!((geom_ratio(a, j) - direct).abs() <= 1e-6 * direct);
    assert!((geom_ratio(a, j) / 1e6 - 1.0 - 5e-4).abs() < 1e-6);
}

#[test]
fn mean_a_matches_direct_loop() {
    let n = 100;
    let off = OffspringFns::new(|n| 1.0 - 1.0 / n as f64, |_| 1.0);
    let imm = ImmigrationFns::independent(|_, j| j as f64, |_, _| 1.0);
    let a: f64 = 1.0 - 1.0 / n as f64;
    let direct: f64 = (1..=n).map(|j| a.powi((n - j) as i32) * j as f64).sum();
    let v = mean_a(&off, &imm, n, n).unwrap();
    assert!((v - direct).abs() <= 1e-12 * direct);
}

#[test]
fn lemma5_examples() {
    let off = OffspringFns::near_critical(0.0, 1.0);
    let imm = ImmigrationFns::independent(|_, k| k as f64, |_, k| k as f64);
    let alpha = RegVarSeq::power(1.0);
    let p = DriftParam::new(0.0, 1.0, 1.0).unwrap();
    let checks = lemma5_check(
        &off,
        &imm,
        Normalizers { alpha: &alpha, beta: &alpha },
        &p,
        100_000,
        &[0.0, 1.0],
    )
    .unwrap();
    let mean = &checks[0];
    assert_eq!(mean.scaled[0], 0.0);
    assert!((mean.scaled[1] - 0.5).abs() < 1e-4);
    assert!((checks[1].scaled[1] - 1.0 / 6.0).abs() < 1e-2);
    assert!(checks.iter().all(|c| c.limit[0] == 0.0));
}

#[test]
fn lemma6_examples() {
    let off = OffspringFns::near_critical(0.0, 1.0);
    let imm = ImmigrationFns::independent(|_, k| k as f64, |_, k| k as f64);
    let alpha = RegVarSeq::power(1.0);
    let p = DriftParam::new(0.0, 1.0, 1.0).unwrap();
    let checks = lemma6_check(
        &off,
        &imm,
        Normalizers { alpha: &alpha, beta: &alpha },
        &p,
        100_000,
        1.7,
        &[0.0, 0.5, 1.0],
    )
    .unwrap();
    let part3 = checks.last().unwrap();
    assert!((part3.scaled[2] - 1.0 / 6.0).abs() < 1e-3);
    assert!((part3.limit[2] - 1.0 / 6.0).abs() < 1e-9);
    // part 1 at a = 0: s^{α+3}/((α+1)(α+2)(α+3))
    let part1 = &checks[0];
    assert!((part1.limit[1] - 0.5f64.powi(4) / 24.0).abs() < 1e-10);
    assert!(checks.iter().all(|c| c.scaled[0] == 0.0 && c.limit[0] == 0.0));
}

#[test]
fn lemma4_examples() {
    let flat = OffspringFns::near_critical(0.0, 1.0);
    let c = lemma4_check(&RegVarSeq::power(1.0), &flat, 0.0, 0.0, 100_000, &[1.0]).unwrap();
    assert!(c.max_deviation <= 1e-4);
    let c = lemma4_check(&RegVarSeq::power(0.0), &flat, 0.0, 0.0, 1000, &[0.3, 1.0]).unwrap();
    assert!(c.max_deviation <= 2e-3);
    let drift = OffspringFns::near_critical(1.0, 1.0);
    let c = lemma4_check(&RegVarSeq::power(1.0), &drift, 1.0, -2.0, 10_000, &[0.5, 1.0]).unwrap();
    // ∫_0^1 t e^{-2t} dt = (1 - 3e^{-2})/4
    assert!((c.limit[1] - (1.0 - 3.0 * (-2.0f64).exp()) / 4.0).abs() < 1e-12);
    assert!(c.max_deviation < 1e-2);
}

fn brute_tables(a: f64, b: f64, alpha: &[f64], beta: &[f64], cov: impl Fn(usize, usize) -> f64, k: usize) -> [f64; 4] {
    let mean: f64 = (1..=k).map(|j| a.powi((k - j) as i32) * alpha[j]).sum();
    let delta: f64 = (1..=k)
        .map(|j| alpha[j] * a.powi(k as i32 - j as i32 - 1) * geom_ratio(a, k - j) * b)
        .sum();
    let sigma: f64 = (1..=k).map(|j| beta[j] * a.powi(2 * (k - j) as i32)).sum();
    let mut omega = 0.0;
    for j in 2..=k {
        for i in 1..j {
            omega += cov(j, i) * a.powi((2 * k - j - i) as i32);
        }
    }
    [mean, delta, sigma, omega]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tables_agree_with_double_sums(
        a in 0.9f64..1.1,
        b in 0.0f64..3.0,
        alphas in proptest::collection::vec(0.0f64..5.0, 30),
        rho in -0.5f64..0.5,
        m in 0usize..4,
    ) {
        let k_max = alphas.len();
        let mut alpha = vec![0.0];
        alpha.extend(alphas.iter().copied());
        let beta: Vec<f64> = alpha.iter().map(|x| 1.0 + x).collect();
        let (al, be) = (alpha.clone(), beta.clone());
        let cov = move |j: usize, i: usize| if j - i <= m { rho * (beta[j] * beta[i]).sqrt() / (j - i) as f64 } else { 0.0 };
        let cov2 = cov.clone();
        let off = OffspringFns::new(move |_| a, move |_| b);
        let imm = ImmigrationFns::independent(move |_, k| al[k], move |_, k| be[k])
            .with_covariance(move |_, j, i| cov2(j, i), Some(m));
        let t = var_tables(&off, &imm, 10, k_max).unwrap();
        for k in 1..=k_max {
            let [mean, delta, sigma, omega] = brute_tables(a, b, &alpha, &(alpha.iter().map(|x| 1.0 + x).collect::<Vec<_>>()), &cov, k);
            prop_assert!((t.mean[k] - mean).abs() <= 1e-10 * mean.abs().max(1.0));
            prop_assert!((t.delta2[k] - delta).abs() <= 1e-10 * delta.abs().max(1.0));
            prop_assert!((t.sigma2[k] - sigma).abs() <= 1e-10 * sigma.abs().max(1.0));
            prop_assert!((t.omega[k] - omega).abs() <= 1e-10 * omega.abs().max(1.0));
            let sum = t.delta2[k] + t.sigma2[k] + 2.0 * t.omega[k];
            prop_assert!((t.b2[k] - sum).abs() <= 1e-9 * t.b2[k].abs().max(1e-300));
            prop_assert!(t.mean[k] >= 0.0 && t.delta2[k] >= 0.0 && t.sigma2[k] >= 0.0);
        }
    }

    #[test]
    fn geom_ratio_is_continuous_at_one(j in 1usize..1_000_000, up in proptest::bool::ANY) {
        let a = if up { 1.0 + 1e-12 } else { 1.0 - 1e-12 };
        prop_assert!((geom_ratio(a, j) - j as f64).abs() <= 1e-6 * j as f64);
    }

    #[test]
    fn geom_ratio_matches_loop(a in 0.5f64..1.5, j in 0usize..200) {
        let direct = kahan_geom(a, j);
        prop_assert!((geom_ratio(a, j) - direct).abs() <= 1e-10 * direct.max(1.0));
    }
}
