//! Offspring laws, path simulation of `X_k = Σ_{j ≤ X_{k-1}} ξ_{k,j} + ε_k`,
//! scaled paths and the martingale-difference diagnostics.

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::immigration::{poisson, ImmigrationModel};
use crate::moments::{MomentTables, OffspringMoments};
use crate::regvar::floor_product;
use crate::rng::Stream;

/// Default population cap; exceeding it is an error.
pub const DEFAULT_CAP: u64 = 1 << 62;

/// A family of offspring laws indexed by the row `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum OffspringLaw {
    /// Bernoulli with success probability `1 − decay/n`.
    Bernoulli { decay: f64 },
    /// Poisson with mean `1 + drift/n`.
    Poisson { drift: f64 },
    /// Values `{n, d_n, 0}` with probabilities `{drift/n², 1/d_n, rest}`,
    /// `d_n = max(1, round(spread · n))`.
    ThreePoint { drift: f64, spread: f64 },
    /// The same finite law in every row.
    Generic { values: Vec<u64>, probs: Vec<f64> },
}

/// The offspring law of one row.
#[derive(Debug, Clone, PartialEq)]
pub enum RowLaw {
    Bernoulli { p: f64 },
    Poisson { mean: f64 },
    Finite { values: Vec<u64>, probs: Vec<f64> },
}

impl OffspringLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            OffspringLaw::Bernoulli { decay } if !(*decay >= 0.0) || !decay.is_finite() => Err(
                Error::InvalidParameter(format!("Bernoulli decay must be finite and nonnegative, got {decay}")),
            ),
            OffspringLaw::Poisson { drift } if !drift.is_finite() => {
                Err(Error::InvalidParameter(format!("Poisson drift must be finite, got {drift}")))
            }
            OffspringLaw::ThreePoint { drift, spread } if !(*drift >= 0.0) || !(*spread > 0.0) => Err(
                Error::InvalidParameter("three-point law needs drift ≥ 0 and spread > 0".into()),
            ),
            OffspringLaw::Generic { values, probs } => check_finite(values, probs),
            _ => Ok(()),
        }
    }

    /// The near-critical drift `a = lim n(a_n − 1)` when the family has one.
    pub fn drift(&self) -> Option<f64> {
        match self {
            OffspringLaw::Bernoulli { decay } => Some(-decay),
            OffspringLaw::Poisson { drift } => Some(*drift),
            OffspringLaw::ThreePoint { drift, .. } => Some(*drift),
            OffspringLaw::Generic { .. } => None,
        }
    }

    fn spread_value(spread: f64, n: usize) -> u64 {
        (spread * n as f64).round().max(1.0) as u64
    }

    /// The law of row `n`.
    pub fn row(&self, n: usize) -> Result<RowLaw> {
        let nf = n.max(1) as f64;
        match self {
            OffspringLaw::Bernoulli { decay } => {
                let p = 1.0 - decay / nf;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidParameter(format!(
                        "Bernoulli success probability 1 - {decay}/{n} is outside [0, 1]"
                    )));
                }
                Ok(RowLaw::Bernoulli { p })
            }
            OffspringLaw::Poisson { drift } => {
                let mean = 1.0 + drift / nf;
                if !(mean >= 0.0) {
                    return Err(Error::InvalidParameter(format!("Poisson offspring mean {mean} is negative")));
                }
                Ok(RowLaw::Poisson { mean })
            }
            OffspringLaw::ThreePoint { drift, spread } => {
                let d = Self::spread_value(*spread, n);
                let p_top = drift / (nf * nf);
                let p_mid = 1.0 / d as f64;
                let rest = 1.0 - p_top - p_mid;
                if rest < -1e-15 {
                    return Err(Error::InvalidParameter(format!(
                        "three-point law has negative mass at 0 for n = {n}"
                    )));
                }
                Ok(RowLaw::Finite {
                    values: vec![n as u64, d, 0],
                    probs: vec![p_top, p_mid, rest.max(0.0)],
                })
            }
            OffspringLaw::Generic { values, probs } => {
                check_finite(values, probs)?;
                Ok(RowLaw::Finite {
                    values: values.clone(),
                    probs: probs.clone(),
                })
            }
        }
    }

    /// Growth exponent of the support radius, `None` for unbounded support.
    pub fn support_exponent(&self) -> Option<f64> {
        match self {
            OffspringLaw::Bernoulli { .. } | OffspringLaw::Generic { .. } => Some(0.0),
            OffspringLaw::ThreePoint { .. } => Some(1.0),
            OffspringLaw::Poisson { .. } => None,
        }
    }

    /// Growth exponent of `b_n`.
    pub fn variance_exponent(&self) -> f64 {
        match self {
            OffspringLaw::Bernoulli { decay } if *decay > 0.0 => -1.0,
            OffspringLaw::ThreePoint { .. } => 1.0,
            _ => 0.0,
        }
    }
}

fn check_finite(values: &[u64], probs: &[f64]) -> Result<()> {
    if values.is_empty() || values.len() != probs.len() {
        return Err(Error::InvalidParameter("finite law needs one probability per value".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("finite law probabilities must lie in [0, 1]".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidParameter(format!("finite law probabilities sum to {total}")));
    }
    Ok(())
}

impl RowLaw {
    pub fn mean(&self) -> f64 {
        match self {
            RowLaw::Bernoulli { p } => *p,
            RowLaw::Poisson { mean } => *mean,
            RowLaw::Finite { values, probs } => values.iter().zip(probs).map(|(v, p)| *v as f64 * p).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            RowLaw::Bernoulli { p } => p * (1.0 - p),
            RowLaw::Poisson { mean } => *mean,
            RowLaw::Finite { values, probs } => {
                let m = self.mean();
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| (*v as f64 - m).powi(2) * p)
                    .sum()
            }
        }
    }
}

impl OffspringMoments for OffspringLaw {
    fn mean(&self, n: usize) -> f64 {
        self.row(n).map(|r| r.mean()).unwrap_or(f64::NAN)
    }

    fn variance(&self, n: usize) -> f64 {
        self.row(n).map(|r| r.variance()).unwrap_or(f64::NAN)
    }
}

fn binomial(count: u64, p: f64, rng: &mut Stream) -> Result<u64> {
    let p = p.clamp(0.0, 1.0);
    let d = Binomial::new(count, p).map_err(|e| Error::InvalidParameter(format!("binomial draw: {e}")))?;
    Ok(d.sample(rng))
}

/// Sum of `count` iid offspring counts drawn from `law`.
pub fn offspring_sum(law: &RowLaw, count: u64, rng: &mut Stream) -> Result<u128> {
    if count == 0 {
        return Ok(0);
    }
    match law {
        RowLaw::Bernoulli { p } => binomial(count, *p, rng).map(u128::from),
        RowLaw::Poisson { mean } => poisson(count as f64 * mean, rng).map(u128::from),
        RowLaw::Finite { values, probs } => {
            let mut remaining = count;
            let mut mass = 1.0;
            let mut total: u128 = 0;
            let last = values.len() - 1;
            for (i, (v, p)) in values.iter().zip(probs).enumerate() {
                if remaining == 0 {
                    break;
                }
                let drawn = if i == last || mass <= *p {
                    remaining
                } else {
                    binomial(remaining, p / mass, rng)?
                };
                total += u128::from(drawn) * u128::from(*v);
                remaining -= drawn;
                mass -= p;
            }
            Ok(total)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub diagnostics: bool,
    pub cap: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            diagnostics: false,
            cap: DEFAULT_CAP,
        }
    }
}

/// Per-generation martingale-difference diagnostics; index 0 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `T_k = Σ ξ − a_n X_{k−1}`
    pub offspring_noise: Vec<f64>,
    /// `N_k = ε_k − CM_k`
    pub immigration_noise: Vec<f64>,
    /// `M_k = T_k + N_k`
    pub martingale: Vec<f64>,
    /// `CM_k`, the conditional mean of `ε_k` given the immigration model's own past
    pub conditional_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessPath {
    pub n: usize,
    /// `X_0 = 0, X_1, …, X_K`
    pub generations: Vec<u64>,
    pub diagnostics: Option<Diagnostics>,
}

/// Simulates `K` generations of row `n` starting from `X_0 = 0`.
pub fn simulate_path(
    law: &OffspringLaw,
    model: &ImmigrationModel,
    n: usize,
    generations: usize,
    rng: &mut Stream,
    options: SimOptions,
) -> Result<ProcessPath> {
    if generations == 0 {
        return Err(Error::InvalidParameter("a path needs at least one generation".into()));
    }
    let row = law.row(n)?;
    let a_n = row.mean();
    let mut sampler = model.sampler(n, rng)?;
    let mut xs = Vec::with_capacity(generations + 1);
    xs.push(0u64);
    let mut diag = options.diagnostics.then(|| Diagnostics {
        offspring_noise: vec![0.0; generations + 1],
        immigration_noise: vec![0.0; generations + 1],
        martingale: vec![0.0; generations + 1],
        conditional_mean: vec![0.0; generations + 1],
    });
    for k in 1..=generations {
        let prev = xs[k - 1];
        let offspring = offspring_sum(&row, prev, rng)?;
        let (eps, cm) = sampler.next_with_mean(rng)?;
        let next = offspring + u128::from(eps);
        if next > u128::from(options.cap) {
            return Err(Error::ExplosionCap {
                generation: k,
                population: next,
            });
        }
        xs.push(next as u64);
        if let Some(d) = diag.as_mut() {
            let t = offspring as f64 - a_n * prev as f64;
            let nk = eps as f64 - cm;
            d.offspring_noise[k] = t;
            d.immigration_noise[k] = nk;
            d.martingale[k] = t + nk;
            d.conditional_mean[k] = cm;
        }
    }
    Ok(ProcessPath {
        n,
        generations: xs,
        diagnostics: diag,
    })
}

/// `Y(k)`: generation size after `k` steps from a single ancestor, no immigration.
pub fn simulate_single_ancestor(law: &OffspringLaw, n: usize, k: usize, rng: &mut Stream, cap: u64) -> Result<u64> {
    let row = law.row(n)?;
    let mut y: u64 = 1;
    for g in 1..=k {
        let next = offspring_sum(&row, y, rng)?;
        if next > u128::from(cap) {
            return Err(Error::ExplosionCap {
                generation: g,
                population: next,
            });
        }
        y = next as u64;
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledPath {
    pub grid: Vec<f64>,
    /// `X_{⌊nt⌋}/A(n)`
    pub x: Vec<f64>,
    /// `(X_{⌊nt⌋} − A_n(⌊nt⌋))/B(n)`
    pub z: Vec<f64>,
    /// `(1/B(n)) Σ_{k ≤ ⌊nt⌋} a_n^{−k} M_k`
    pub z1: Option<Vec<f64>>,
    /// `(1/B(n)) Σ_{k ≤ ⌊nt⌋} a_n^{−k} (CM_k − α(n,k))`
    pub z2: Option<Vec<f64>>,
}

/// `{j/points · T : j = 0..=points}`
pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    (0..=points).map(|j| j as f64 / points as f64 * horizon).collect()
}

/// Scales a path by the moment tables of the same row.
pub fn scale_path(path: &ProcessPath, tables: &MomentTables, grid: &[f64]) -> Result<ScaledPath> {
    let n = path.n;
    let big_a = tables.big_a()?;
    let big_b = tables.big_b()?;
    if !(big_b > 0.0) || !big_b.is_finite() {
        return Err(Error::DegenerateNormalization(big_b));
    }
    if !(big_a > 0.0) {
        return Err(Error::DegenerateNormalization(big_a));
    }
    let last = path.generations.len() - 1;
    let idx: Vec<usize> = grid
        .iter()
        .map(|&t| {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!("grid time {t} is negative")));
            }
            let k = floor_product(n, t);
            if k > last || k > tables.max_generation() {
                Err(Error::InvalidParameter(format!(
                    "grid time {t} needs generation {k}, beyond the simulated {last}"
                )))
            } else {
                Ok(k)
            }
        })
        .collect::<Result<_>>()?;

    let x = idx.iter().map(|&k| path.generations[k] as f64 / big_a).collect();
    let z = idx
        .iter()
        .map(|&k| (path.generations[k] as f64 - tables.mean[k]) / big_b)
        .collect();

    let (z1, z2) = match &path.diagnostics {
        Some(d) => {
            let top = idx.iter().copied().max().unwrap_or(0);
            let log_a = tables.a_n.ln();
            let mut s1 = vec![0.0; top + 1];
            let mut s2 = vec![0.0; top + 1];
            for k in 1..=top {
                let w = (-(k as f64) * log_a).exp();
                s1[k] = s1[k - 1] + w * d.martingale[k];
                s2[k] = s2[k - 1] + w * (d.conditional_mean[k] - tables.alpha[k]);
            }
            (
                Some(idx.iter().map(|&k| s1[k] / big_b).collect()),
                Some(idx.iter().map(|&k| s2[k] / big_b).collect()),
            )
        }
        None => (None, None),
    };
    Ok(ScaledPath {
        grid: grid.to_vec(),
        x,
        z,
        z1,
        z2,
    })
}

fn poisson_ln_pmf(mean: f64, j: u64) -> f64 {
    -mean + j as f64 * mean.ln() - ln_gamma(j as f64 + 1.0)
}

/// `E[(ξ − a_n)² 1{|ξ − a_n| > ε B}]` for the row-`n` law.
///
/// Exact on finite supports. For Poisson laws the two exceedance regions are
/// summed term by term in log space until the terms stop contributing.
pub fn lindeberg_stat(law: &OffspringLaw, n: usize, big_b: f64, eps: f64) -> Result<f64> {
    if !(eps > 0.0) || !(big_b > 0.0) {
        return Err(Error::InvalidParameter("Lindeberg statistic needs eps > 0 and B > 0".into()));
    }
    let row = law.row(n)?;
    let a = row.mean();
    let cut = eps * big_b;
    if !cut.is_finite() {
        return Ok(0.0);
    }
    let exceeds = |v: f64| (v - a).abs() > cut;
    match row {
        RowLaw::Bernoulli { p } => Ok([(0.0, 1.0 - p), (1.0, p)]
            .iter()
            .filter(|(v, _)| exceeds(*v))
            .fold(0.0, |acc, (v, q)| acc + (v - a).powi(2) * q)),
        RowLaw::Finite { values, probs } => Ok(values
            .iter()
            .zip(&probs)
            .filter(|(v, _)| exceeds(**v as f64))
            .fold(0.0, |acc, (v, q)| acc + (*v as f64 - a).powi(2) * q)),
        RowLaw::Poisson { mean } => {
            if mean == 0.0 {
                return Ok(if exceeds(0.0) { a * a } else { 0.0 });
            }
            let term = |j: u64| (j as f64 - mean).powi(2) * poisson_ln_pmf(mean, j).exp();
            let mut total = 0.0;
            // lower region 0 ≤ j < a − cut
            let lower_end = a - cut;
            if lower_end > 0.0 {
                let top = lower_end.ceil() as u64;
                for j in 0..top {
                    if exceeds(j as f64) {
                        total += term(j);
                    }
                }
            }
            // upper region j > a + cut
            let start = (a + cut).floor() as u64 + 1;
            let mut j = start;
            loop {
                let t = term(j);
                total += t;
                if j as f64 > mean + 1.0 && (t == 0.0 || t <= total * 1e-17) {
                    break;
                }
                j += 1;
            }
            Ok(total)
        }
    }
}

/// Whether the Lindeberg condition holds given `B(n) ≍ n^{(1 + α_index + ρ_b)/2}`,
/// with `ρ_b` the growth exponent of `b_n`.
pub fn lindeberg_witness(law: &OffspringLaw, alpha_index: f64) -> bool {
    let b_exponent = 0.5 * (2.0 + alpha_index + law.variance_exponent());
    match law.support_exponent() {
        Some(r) => r < b_exponent,
        None => b_exponent > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immigration::Perturbation;
    use crate::moments::var_tables;
    use crate::regvar::RegVarSeq;
    use crate::rng::{stream, Purpose};

    #[test]
    fn offspring_sum_edge_cases() {
        let mut rng = stream(1, 10, Purpose::Offspring, 0);
        let b = RowLaw::Bernoulli { p: 1.0 };
        assert_eq!(offspring_sum(&b, 0, &mut rng).unwrap(), 0);
        assert_eq!(offspring_sum(&b, 5, &mut rng).unwrap(), 5);
        let f = RowLaw::Finite {
            values: vec![3, 0],
            probs: vec![1.0, 0.0],
        };
        assert_eq!(offspring_sum(&f, 4, &mut rng).unwrap(), 12);
    }

    #[test]
    fn row_moments() {
        let law = OffspringLaw::ThreePoint { drift: 2.0, spread: 0.5 };
        let row = law.row(100).unwrap();
        assert!((row.mean() - 1.02).abs() < 1e-12);
        let bern = OffspringLaw::Bernoulli { decay: 1.0 };
        assert!((bern.mean(500) - 0.998).abs() < 1e-15);
        assert_eq!(bern.drift(), Some(-1.0));
        assert!(OffspringLaw::Bernoulli { decay: 2.0 }.row(1).is_err());
    }

    #[test]
    fn deterministic_paths() {
        let law = OffspringLaw::Generic {
            values: vec![1],
            probs: vec![1.0],
        };
        let ones = ImmigrationModel::independent_poisson(RegVarSeq::power(0.0), Perturbation::None);
        let mut rng = stream(3, 10, Purpose::Path, 0);
        let zero = OffspringLaw::Generic {
            values: vec![0],
            probs: vec![1.0],
        };
        // the two-point law has ε_1 ≡ 0
        let two = ImmigrationModel::two_point(Perturbation::None);
        let p = simulate_path(&zero, &two, 10, 1, &mut rng, SimOptions::default()).unwrap();
        assert_eq!(p.generations, vec![0, 0]);
        let p = simulate_path(&law, &ones, 10, 5, &mut rng, SimOptions { diagnostics: true, cap: DEFAULT_CAP }).unwrap();
        assert_eq!(p.generations[0], 0);
        let d = p.diagnostics.unwrap();
        for k in 1..=5 {
            assert_eq!(d.offspring_noise[k], 0.0);
            assert_eq!(d.martingale[k], d.offspring_noise[k] + d.immigration_noise[k]);
        }
    }

    #[test]
    fn explosion_cap() {
        let law = OffspringLaw::Generic {
            values: vec![10],
            probs: vec![1.0],
        };
        let imm = ImmigrationModel::independent_poisson(RegVarSeq::power(0.0).with_scale(5.0), Perturbation::None);
        let mut rng = stream(3, 10, Purpose::Path, 0);
        let err = simulate_path(&law, &imm, 10, 50, &mut rng, SimOptions { diagnostics: false, cap: 1_000_000 });
        assert!(matches!(err, Err(Error::ExplosionCap { .. })));
    }

    #[test]
    fn decomposition_identity_on_a_path() {
        let law = OffspringLaw::Poisson { drift: 1.0 };
        let imm = ImmigrationModel::block_sum(
            3,
            crate::immigration::Innovation::Poisson,
            RegVarSeq::power(1.0),
            Perturbation::None,
        );
        let n = 300;
        let tables = var_tables(&law, &imm, n, n).unwrap();
        let mut rng = stream(11, n, Purpose::Path, 2);
        let path = simulate_path(&law, &imm, n, n, &mut rng, SimOptions { diagnostics: true, cap: DEFAULT_CAP }).unwrap();
        let grid = uniform_grid(1.0, 100);
        let s = scale_path(&path, &tables, &grid).unwrap();
        assert_eq!(s.x[0], 0.0);
        assert_eq!(s.z[0], 0.0);
        let (z1, z2) = (s.z1.unwrap(), s.z2.unwrap());
        for (i, &t) in grid.iter().enumerate() {
            let k = floor_product(n, t) as f64;
            let lhs = (-k * tables.a_n.ln()).exp() * s.z[i];
            let rhs = z1[i] + z2[i];
            assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "t={t}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn lindeberg_examples() {
        let three = OffspringLaw::ThreePoint { drift: 1.0, spread: 1.0 };
        let zero = lindeberg_stat(&three, 1000, 1e7, 0.5).unwrap();
        assert!(zero == 0.0 && zero.is_sign_positive());
        let pois = OffspringLaw::Poisson { drift: 0.0 };
        assert_eq!(lindeberg_stat(&pois, 10, 1.0, f64::INFINITY).unwrap(), 0.0);
        // direct 50-term tail sum for mean 1, cut 10: j ≥ 12
        let direct: f64 = (12u64..62)
            .map(|j| (j as f64 - 1.0).powi(2) * (-1.0f64).exp() / (1..=j).map(|i| i as f64).product::<f64>())
            .sum();
        let v = lindeberg_stat(&pois, 10, 10.0, 1.0).unwrap();
        assert!((v - direct).abs() <= 1e-12 * direct, "{v} vs {direct}");
        assert!(lindeberg_witness(&three, 1.0));
        assert!(lindeberg_witness(&pois, 1.0));
    }
}
