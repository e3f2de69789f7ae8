use nearcrit::immigration::{ImmigrationModel, Innovation, Perturbation};
use nearcrit::moments::{mean_a, var_tables, OffspringMoments};
use nearcrit::regvar::RegVarSeq;
use nearcrit::rng::{stream, Purpose};
use nearcrit::simulator::{offspring_sum, scale_path, simulate_path, OffspringLaw, ProcessPath, RowLaw, SimOptions};
use nearcrit::stats::{mean_estimate, variance_estimate, Estimate};
use nearcrit::verify::{single_ancestor_check, variance_check};

fn within(est: Estimate, reference: f64, k: f64, what: &str) {
    let z = est.z_score(reference).unwrap();
    assert!(z <= k, "{what}: {} vs {reference} ({z:.2} se)", est.value);
}

fn diff_estimate(a: Estimate, b: Estimate) -> Estimate {
    Estimate {
        value: a.value - b.value,
        se: Some((a.se.unwrap().powi(2) + b.se.unwrap().powi(2)).sqrt()),
    }
}

#[test]
fn poisson_offspring_sum_additivity() {
    let law = RowLaw::Poisson { mean: 1.0 };
    let mut rng = stream(1, 1, Purpose::Offspring, 0);
    let draws: Vec<f64> = (0..10_000).map(|_| offspring_sum(&law, 10_000, &mut rng).unwrap() as f64).collect();
    within(mean_estimate(&draws), 1e4, 4.0, "poisson sum mean");
    within(variance_estimate(&draws), 1e4, 4.0, "poisson sum variance");
}

#[test]
fn finite_law_sums_are_additive() {
    let law = OffspringLaw::ThreePoint { drift: 2.0, spread: 0.3 }.row(40).unwrap();
    let reps = 40_000;
    let mut rng = stream(2, 1, Purpose::Offspring, 0);
    let whole: Vec<f64> = (0..reps).map(|_| offspring_sum(&law, 50, &mut rng).unwrap() as f64).collect();
    let mut rng = stream(2, 1, Purpose::Offspring, 1);
    let split: Vec<f64> = (0..reps)
        .map(|_| (offspring_sum(&law, 20, &mut rng).unwrap() + offspring_sum(&law, 30, &mut rng).unwrap()) as f64)
        .collect();
    within(diff_estimate(mean_estimate(&whole), mean_estimate(&split)), 0.0, 4.0, "additive mean");
    within(diff_estimate(variance_estimate(&whole), variance_estimate(&split)), 0.0, 4.0, "additive variance");
    within(mean_estimate(&whole), 50.0 * law.mean(), 4.0, "sum mean");
    within(variance_estimate(&whole), 50.0 * law.variance(), 4.0, "sum variance");
}

#[test]
fn deterministic_accumulation() {
    let one_child = OffspringLaw::Generic { values: vec![1], probs: vec![1.0] };
    let unit = ImmigrationModel::block_sum(0, Innovation::Poisson, RegVarSeq::power(0.0), Perturbation::None);
    // one child per parent, so X_k − X_{k−1} = ε_k
    let mut rng = stream(4, 10, Purpose::Path, 0);
    let p = simulate_path(&one_child, &unit, 10, 30, &mut rng, SimOptions { diagnostics: true, ..Default::default() }).unwrap();
    let d = p.diagnostics.as_ref().unwrap();
    for k in 1..=30 {
        let eps = p.generations[k] - p.generations[k - 1];
        assert_eq!(d.immigration_noise[k], eps as f64 - d.conditional_mean[k]);
        assert_eq!(d.offspring_noise[k], 0.0);
    }
}

fn bernoulli_block_sum() -> (OffspringLaw, ImmigrationModel) {
    (
        OffspringLaw::Bernoulli { decay: 1.0 },
        ImmigrationModel::block_sum(3, Innovation::Poisson, RegVarSeq::power(1.0), Perturbation::InverseLog { scale: 1.0 }),
    )
}

fn paths(law: &OffspringLaw, model: &ImmigrationModel, n: usize, reps: u64, seed: u64) -> Vec<ProcessPath> {
    (0..reps)
        .map(|r| {
            let mut rng = stream(seed, n, Purpose::Path, r);
            simulate_path(law, model, n, n, &mut rng, SimOptions { diagnostics: true, ..Default::default() }).unwrap()
        })
        .collect()
}

#[test]
fn bernoulli_block_sum_mean_matches_moment_tables() {
    let (law, model) = bernoulli_block_sum();
    let n = 500;
    let ps = paths(&law, &model, n, 10_000, 10);
    let finals: Vec<f64> = ps.iter().map(|p| p.generations[n] as f64).collect();
    within(mean_estimate(&finals), mean_a(&law, &model, n, n).unwrap(), 4.0, "E X_n");
}

#[test]
fn martingale_differences_and_offspring_variance() {
    let law = OffspringLaw::Poisson { drift: 1.0 };
    let model = ImmigrationModel::block_sum(3, Innovation::Poisson, RegVarSeq::power(1.0), Perturbation::None);
    let n = 200;
    let ps = paths(&law, &model, n, 4000, 11);
    for k in [1usize, 10, 100, 200] {
        let mk: Vec<f64> = ps.iter().map(|p| p.diagnostics.as_ref().unwrap().martingale[k]).collect();
        within(mean_estimate(&mk), 0.0, 4.0, &format!("E M_{k}"));
    }
    // E(T_k² | X_{k−1}) = b_n X_{k−1}: regression through the origin with a robust SE
    let (mut sxy, mut sxx) = (0.0, 0.0);
    let mut pairs = Vec::new();
    for p in &ps {
        let d = p.diagnostics.as_ref().unwrap();
        for k in (20..=n).step_by(20) {
            let x = p.generations[k - 1] as f64;
            let y = d.offspring_noise[k].powi(2);
            sxy += x * y;
            sxx += x * x;
            pairs.push((x, y));
        }
    }
    let slope = sxy / sxx;
    let meat: f64 = pairs.iter().map(|(x, y)| (x * (y - slope * x)).powi(2)).sum();
    let se = meat.sqrt() / sxx;
    let b = law.variance(n);
    assert!((slope - b).abs() <= 3.0 * se, "slope {slope} vs b_n {b} (se {se})");
}

#[test]
fn independent_immigration_has_no_drift_term() {
    let law = OffspringLaw::Poisson { drift: 0.5 };
    let model = ImmigrationModel::independent_poisson(RegVarSeq::power(1.0), Perturbation::None);
    let n = 100;
    let tables = var_tables(&law, &model, n, n).unwrap();
    let grid = nearcrit::simulator::uniform_grid(1.0, 100);
    for p in paths(&law, &model, n, 20, 12) {
        let s = scale_path(&p, &tables, &grid).unwrap();
        assert!(s.z2.unwrap().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn variance_and_single_ancestor_checks_small() {
    let (law, model) = bernoulli_block_sum();
    let r = variance_check(&law, &model, 100, 20_000, 3, 4.0).unwrap();
    assert!(r.passed(), "{}", r.line());
    let poisson = OffspringLaw::Poisson { drift: 0.0 };
    for rep in single_ancestor_check(&poisson, 50, 10, 20_000, 4, 4.0).unwrap() {
        assert!(rep.passed(), "{}", rep.line());
    }
}
