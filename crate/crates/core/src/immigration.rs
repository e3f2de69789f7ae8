//! Rowwise immigration sequences: independent, m-dependent block sums and
//! Markov-modulated Poisson, each with exact moments, covariances and a
//! certified ψ-mixing bound.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::ImmigrationMoments;
use crate::regvar::{RegVarSeq, SlowlyVarying};
use crate::rng::{stream, Purpose, Stream};
use crate::stats::{covariance_estimate, mean};
use crate::verify::{Comparison, TestReport};

/// Means above this are rejected as configuration errors.
pub const MAX_POISSON_MEAN: f64 = 1e12;

/// Stand-in for the unbounded ψ of a block sum at lags `≤ m`.
pub const DEFAULT_PSI_CAP: f64 = 1e6;

/// Lag covariances of the Markov model are kept while the ψ bound exceeds this.
const MARKOV_COV_CUTOFF: f64 = 1e-16;

/// The vanishing row perturbation `x_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Perturbation {
    #[default]
    None,
    /// `x_n = scale / ln n` (with `ln 2` used for `n < 2`)
    InverseLog { scale: f64 },
    /// `x_n = scale · n^{-power}`
    InversePower { scale: f64, power: f64 },
}

impl Perturbation {
    pub fn eval(&self, n: usize) -> f64 {
        match *self {
            Perturbation::None => 0.0,
            Perturbation::InverseLog { scale } => scale / (n.max(2) as f64).ln(),
            Perturbation::InversePower { scale, power } => scale * (n.max(1) as f64).powf(-power),
        }
    }
}

/// Row means `α(n,k) = α(k)(1 + x_n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanProfile {
    pub target: RegVarSeq,
    #[serde(default)]
    pub perturbation: Perturbation,
}

impl MeanProfile {
    pub fn new(target: RegVarSeq, perturbation: Perturbation) -> Self {
        Self { target, perturbation }
    }

    pub fn eval(&self, n: usize, k: usize) -> f64 {
        self.target.eval(k) * (1.0 + self.perturbation.eval(n))
    }
}

/// Marginal law of independent immigration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum Marginal {
    /// Poisson with mean `α(n,k)`.
    Poisson { profile: MeanProfile },
    /// `⌊k ln²k⌋` with probability `min(1, (1 + x_n)/ln k)`, else 0; `ε_1 ≡ 0`.
    TwoPoint {
        #[serde(default)]
        perturbation: Perturbation,
    },
}

/// Innovation family of the block-sum model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Innovation {
    Poisson,
    /// Failures before the first success, with the success probability set by the mean.
    Geometric,
}

impl Innovation {
    fn variance(self, mean: f64) -> f64 {
        match self {
            Innovation::Poisson => mean,
            Innovation::Geometric => mean * (1.0 + mean),
        }
    }

    fn sample(self, mean: f64, rng: &mut Stream) -> Result<u64> {
        match self {
            Innovation::Poisson => poisson(mean, rng),
            Innovation::Geometric => {
                if mean == 0.0 {
                    return Ok(0);
                }
                let g = Geometric::new(1.0 / (1.0 + mean))
                    .map_err(|e| Error::InvalidParameter(format!("geometric innovation: {e}")))?;
                Ok(g.sample(rng))
            }
        }
    }
}

/// `ε_k = Σ_{l=k-m}^{k} ζ_l` with independent innovations of mean
/// `c_l = α(n, max(l,1))/(m+1)`, including pre-sample innovations `l ≤ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSum {
    pub m: usize,
    pub innovation: Innovation,
    pub profile: MeanProfile,
    #[serde(default = "default_psi_cap")]
    pub psi_cap: f64,
}

fn default_psi_cap() -> f64 {
    DEFAULT_PSI_CAP
}

impl BlockSum {
    fn innovation_mean(&self, n: usize, l: i64) -> f64 {
        self.profile.eval(n, l.max(1) as usize) / (self.m + 1) as f64
    }

    fn window(&self, k: usize) -> std::ops::RangeInclusive<i64> {
        (k as i64 - self.m as i64)..=(k as i64)
    }
}

/// Poisson immigration modulated by a stationary finite Markov chain.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModulated {
    transition: Vec<Vec<f64>>,
    levels: Vec<f64>,
    stationary: Vec<f64>,
    profile: MeanProfile,
    doeblin: f64,
    level_variance: f64,
    /// `E[L(S_0) L(S_d)] − 1` for `d = 1..`
    lag_factors: Vec<f64>,
    /// `(P L)(s)`
    next_level: Vec<f64>,
}

impl MarkovModulated {
    /// `levels` are rescaled so that their stationary mean is 1.
    pub fn new(transition: Vec<Vec<f64>>, levels: Vec<f64>, profile: MeanProfile) -> Result<Self> {
        let s = transition.len();
        if s == 0 || levels.len() != s {
            return Err(Error::InvalidParameter(
                "Markov modulation needs a square transition matrix and one level per state".into(),
            ));
        }
        for row in &transition {
            if row.len() != s || row.iter().any(|p| !(*p >= 0.0) || *p > 1.0) {
                return Err(Error::InvalidParameter("transition rows must be probability vectors".into()));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!("transition row sums to {total}, not 1")));
            }
        }
        if levels.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidParameter("modulation levels must be positive".into()));
        }
        let doeblin: f64 = (0..s)
            .map(|j| transition.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
            .sum();
        if !(doeblin > 0.0) {
            return Err(Error::InvalidParameter(
                "transition matrix has no Doeblin minorization (some column minimum must be positive)".into(),
            ));
        }
        let stationary = stationary_distribution(&transition, doeblin);
        let avg: f64 = stationary.iter().zip(&levels).map(|(p, l)| p * l).sum();
        let levels: Vec<f64> = levels.iter().map(|l| l / avg).collect();
        let second: f64 = stationary.iter().zip(&levels).map(|(p, l)| p * l * l).sum();
        let level_variance = (second - 1.0).max(0.0);
        let next_level: Vec<f64> = transition
            .iter()
            .map(|row| row.iter().zip(&levels).map(|(p, l)| p * l).sum())
            .collect();

        let pi_min = stationary.iter().copied().fold(f64::INFINITY, f64::min);
        let mut lag_factors = Vec::new();
        let mut propagated = levels.clone();
        let mut d = 1;
        loop {
            propagated = mat_vec(&transition, &propagated);
            let factor: f64 = (0..s)
                .map(|i| stationary[i] * levels[i] * propagated[i])
                .sum::<f64>()
                - 1.0;
            lag_factors.push(factor);
            if (1.0 - doeblin).powi(d) / pi_min < MARKOV_COV_CUTOFF || d >= 100_000 {
                break;
            }
            d += 1;
        }
        Ok(Self {
            transition,
            levels,
            stationary,
            profile,
            doeblin,
            level_variance,
            lag_factors,
            next_level,
        })
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn doeblin(&self) -> f64 {
        self.doeblin
    }

    pub fn level_variance(&self) -> f64 {
        self.level_variance
    }

    pub fn profile(&self) -> &MeanProfile {
        &self.profile
    }

    fn pi_min(&self) -> f64 {
        self.stationary.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn psi_bound(&self, lag: usize) -> f64 {
        (1.0 - self.doeblin).powi(lag.min(i32::MAX as usize) as i32) / self.pi_min()
    }

    fn draw_state(&self, probs: &[f64], rng: &mut Stream) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        probs.len() - 1
    }
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(p, x)| p * x).sum()).collect()
}

fn stationary_distribution(p: &[Vec<f64>], doeblin: f64) -> Vec<f64> {
    let s = p.len();
    let mut pi = vec![1.0 / s as f64; s];
    // contraction at rate 1 − δ in total variation
    let steps = if doeblin >= 1.0 {
        2
    } else {
        ((1e-17f64).ln() / (1.0 - doeblin).ln()).ceil().clamp(2.0, 1e6) as usize
    };
    for _ in 0..steps {
        let mut next = vec![0.0; s];
        for i in 0..s {
            for j in 0..s {
                next[j] += pi[i] * p[i][j];
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum();
        pi = next;
        if change < 1e-18 {
            break;
        }
    }
    pi
}

/// Exact `max_{i,j} |P^lag(i,j)/π_j − 1|` of the modulating chain.
pub fn chain_psi(model: &MarkovModulated, lag: usize) -> f64 {
    let s = model.transition.len();
    let mut power: Vec<Vec<f64>> = (0..s).map(|i| (0..s).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _ in 0..lag {
        power = power
            .iter()
            .map(|row| (0..s).map(|j| (0..s).map(|k| row[k] * model.transition[k][j]).sum()).collect())
            .collect();
    }
    let mut worst: f64 = 0.0;
    for row in &power {
        for (j, p) in row.iter().enumerate() {
            worst = worst.max((p / model.stationary[j] - 1.0).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImmigrationModel {
    Independent(Marginal),
    MDependentBlockSum(BlockSum),
    MarkovModulated(MarkovModulated),
}

/// ψ-mixing certificate of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingProfile {
    /// `psi_bound(lag)` for `lag = 1..=psi.len()`; zero beyond for m-dependent models.
    pub psi: Vec<f64>,
    pub summable_bound: f64,
}

fn two_point_value(k: usize) -> f64 {
    let lk = (k as f64).ln();
    (k as f64 * lk * lk).floor()
}

fn two_point_prob(perturbation: &Perturbation, n: usize, k: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    ((1.0 + perturbation.eval(n)) / (k as f64).ln()).clamp(0.0, 1.0)
}

/// Exact Poisson draw; `mean > MAX_POISSON_MEAN` is an error.
pub fn poisson(mean: f64, rng: &mut Stream) -> Result<u64> {
    if mean == 0.0 {
        return Ok(0);
    }
    if !(mean > 0.0) || mean > MAX_POISSON_MEAN {
        return Err(Error::PoissonMean(mean));
    }
    let d = Poisson::new(mean).map_err(|_| Error::PoissonMean(mean))?;
    Ok(d.sample(rng) as u64)
}

fn square_target(x: &RegVarSeq, factor: f64) -> RegVarSeq {
    let slowly_varying = match &x.slowly_varying {
        SlowlyVarying::Constant => SlowlyVarying::Constant,
        SlowlyVarying::LogPower { power } => SlowlyVarying::LogPower { power: 2.0 * power },
        SlowlyVarying::Tabulated { values } => SlowlyVarying::Tabulated {
            values: values.iter().map(|v| v * v).collect(),
        },
    };
    RegVarSeq {
        index: 2.0 * x.index,
        scale: factor * x.scale * x.scale,
        slowly_varying,
    }
}

impl ImmigrationModel {
    pub fn independent_poisson(target: RegVarSeq, perturbation: Perturbation) -> Self {
        ImmigrationModel::Independent(Marginal::Poisson {
            profile: MeanProfile::new(target, perturbation),
        })
    }

    pub fn two_point(perturbation: Perturbation) -> Self {
        ImmigrationModel::Independent(Marginal::TwoPoint { perturbation })
    }

    pub fn block_sum(m: usize, innovation: Innovation, target: RegVarSeq, perturbation: Perturbation) -> Self {
        ImmigrationModel::MDependentBlockSum(BlockSum {
            m,
            innovation,
            profile: MeanProfile::new(target, perturbation),
            psi_cap: DEFAULT_PSI_CAP,
        })
    }

    /// `(α(n,k), β(n,k))`
    pub fn marginal_moments(&self, n: usize, k: usize) -> (f64, f64) {
        match self {
            ImmigrationModel::Independent(Marginal::Poisson { profile }) => {
                let a = profile.eval(n, k);
                (a, a)
            }
            ImmigrationModel::Independent(Marginal::TwoPoint { perturbation }) => {
                let v = two_point_value(k);
                let p = two_point_prob(perturbation, n, k);
                (v * p, v * v * p * (1.0 - p))
            }
            ImmigrationModel::MDependentBlockSum(b) => {
                let mut mean = 0.0;
                let mut var = 0.0;
                for l in b.window(k) {
                    let c = b.innovation_mean(n, l);
                    mean += c;
                    var += b.innovation.variance(c);
                }
                (mean, var)
            }
            ImmigrationModel::MarkovModulated(mm) => {
                let a = mm.profile.eval(n, k);
                (a, a + a * a * mm.level_variance)
            }
        }
    }

    /// `cov(ε_j, ε_i)` for `j > i ≥ 1`.
    pub fn cov_oracle(&self, n: usize, j: usize, i: usize) -> f64 {
        if j <= i {
            return 0.0;
        }
        let lag = j - i;
        match self {
            ImmigrationModel::Independent(_) => 0.0,
            ImmigrationModel::MDependentBlockSum(b) => {
                if lag > b.m {
                    return 0.0;
                }
                (j as i64 - b.m as i64..=i as i64)
                    .map(|l| b.innovation.variance(b.innovation_mean(n, l)))
                    .sum()
            }
            ImmigrationModel::MarkovModulated(mm) => match mm.lag_factors.get(lag - 1) {
                Some(f) => mm.profile.eval(n, j) * mm.profile.eval(n, i) * f,
                None => 0.0,
            },
        }
    }

    /// Upper bound on `ψ_n(lag)`.
    pub fn psi_bound(&self, lag: usize) -> f64 {
        match self {
            ImmigrationModel::Independent(_) => 0.0,
            ImmigrationModel::MDependentBlockSum(b) => {
                if lag > b.m {
                    0.0
                } else {
                    b.psi_cap
                }
            }
            ImmigrationModel::MarkovModulated(mm) => mm.psi_bound(lag),
        }
    }

    pub fn mixing_profile(&self) -> MixingProfile {
        match self {
            ImmigrationModel::Independent(_) => MixingProfile {
                psi: Vec::new(),
                summable_bound: 0.0,
            },
            ImmigrationModel::MDependentBlockSum(b) => MixingProfile {
                psi: (1..=b.m).map(|l| self.psi_bound(l)).collect(),
                summable_bound: b.m as f64 * b.psi_cap,
            },
            ImmigrationModel::MarkovModulated(mm) => {
                let q = 1.0 - mm.doeblin;
                MixingProfile {
                    psi: (1..=mm.lag_factors.len()).map(|l| mm.psi_bound(l)).collect(),
                    summable_bound: q / (mm.doeblin * mm.pi_min()),
                }
            }
        }
    }

    /// Target sequence `α(k)` of condition C1.
    pub fn alpha_target(&self) -> RegVarSeq {
        match self {
            ImmigrationModel::Independent(Marginal::Poisson { profile }) => profile.target.clone(),
            ImmigrationModel::Independent(Marginal::TwoPoint { .. }) => RegVarSeq::log_power(1.0, 1.0),
            ImmigrationModel::MDependentBlockSum(b) => b.profile.target.clone(),
            ImmigrationModel::MarkovModulated(mm) => mm.profile.target.clone(),
        }
    }

    /// Target sequence `β(k)` of condition C1.
    pub fn beta_target(&self) -> RegVarSeq {
        match self {
            ImmigrationModel::Independent(Marginal::Poisson { profile }) => profile.target.clone(),
            ImmigrationModel::Independent(Marginal::TwoPoint { .. }) => RegVarSeq::log_power(2.0, 3.0),
            ImmigrationModel::MDependentBlockSum(b) => match b.innovation {
                Innovation::Poisson => b.profile.target.clone(),
                Innovation::Geometric => {
                    let t = &b.profile.target;
                    let share = 1.0 / (b.m + 1) as f64;
                    if t.index == 0.0 && t.slowly_varying == SlowlyVarying::Constant {
                        t.clone().with_scale(t.scale + share * t.scale * t.scale)
                    } else {
                        square_target(t, share)
                    }
                }
            },
            ImmigrationModel::MarkovModulated(mm) => {
                if mm.level_variance > 0.0 {
                    square_target(&mm.profile.target, mm.level_variance)
                } else {
                    mm.profile.target.clone()
                }
            }
        }
    }

    /// A sampler that emits `ε_1, ε_2, …` of row `n` with their conditional means.
    pub fn sampler(&self, n: usize, rng: &mut Stream) -> Result<RowSampler<'_>> {
        let state = match self {
            ImmigrationModel::Independent(_) => SamplerState::Memoryless,
            ImmigrationModel::MDependentBlockSum(b) => {
                let mut window = std::collections::VecDeque::with_capacity(b.m + 1);
                for l in (1 - b.m as i64)..=0 {
                    window.push_back(b.innovation.sample(b.innovation_mean(n, l), rng)?);
                }
                SamplerState::Window(window)
            }
            ImmigrationModel::MarkovModulated(_) => SamplerState::Chain(None),
        };
        Ok(RowSampler {
            model: self,
            n,
            k: 0,
            state,
        })
    }
}

impl ImmigrationMoments for ImmigrationModel {
    fn mean(&self, n: usize, k: usize) -> f64 {
        self.marginal_moments(n, k).0
    }

    fn variance(&self, n: usize, k: usize) -> f64 {
        self.marginal_moments(n, k).1
    }

    fn covariance(&self, n: usize, j: usize, i: usize) -> f64 {
        self.cov_oracle(n, j, i)
    }

    fn dependence_range(&self) -> Option<usize> {
        match self {
            ImmigrationModel::Independent(_) => Some(0),
            ImmigrationModel::MDependentBlockSum(b) => Some(b.m),
            ImmigrationModel::MarkovModulated(_) => None,
        }
    }

    fn covariance_bandwidth(&self) -> Option<usize> {
        match self {
            ImmigrationModel::MarkovModulated(mm) => Some(mm.lag_factors.len()),
            _ => self.dependence_range(),
        }
    }
}

enum SamplerState {
    Memoryless,
    /// the last `m` innovations
    Window(std::collections::VecDeque<u64>),
    Chain(Option<usize>),
}

/// Sequential sampler of one immigration row.
pub struct RowSampler<'a> {
    model: &'a ImmigrationModel,
    n: usize,
    k: usize,
    state: SamplerState,
}

impl RowSampler<'_> {
    /// Draws the next `ε_k` and returns it with `E(ε_k | own past)`.
    pub fn next_with_mean(&mut self, rng: &mut Stream) -> Result<(u64, f64)> {
        self.k += 1;
        let (n, k) = (self.n, self.k);
        match (&mut self.state, self.model) {
            (SamplerState::Memoryless, ImmigrationModel::Independent(marginal)) => match marginal {
                Marginal::Poisson { profile } => {
                    let a = profile.eval(n, k);
                    Ok((poisson(a, rng)?, a))
                }
                Marginal::TwoPoint { perturbation } => {
                    let p = two_point_prob(perturbation, n, k);
                    let v = two_point_value(k);
                    let hit = p > 0.0 && rng.random::<f64>() < p;
                    Ok((if hit { v as u64 } else { 0 }, v * p))
                }
            },
            (SamplerState::Window(window), ImmigrationModel::MDependentBlockSum(b)) => {
                let c = b.innovation_mean(n, k as i64);
                let zeta = b.innovation.sample(c, rng)?;
                let carried: u64 = window.iter().sum();
                window.push_back(zeta);
                if window.len() > b.m {
                    window.pop_front();
                }
                Ok((carried + zeta, carried as f64 + c))
            }
            (SamplerState::Chain(state), ImmigrationModel::MarkovModulated(mm)) => {
                let a = mm.profile.eval(n, k);
                let (next, cm) = match *state {
                    None => (mm.draw_state(&mm.stationary, rng), a),
                    Some(s) => (mm.draw_state(&mm.transition[s], rng), a * mm.next_level[s]),
                };
                *state = Some(next);
                Ok((poisson(a * mm.levels[next], rng)?, cm))
            }
            _ => unreachable!("sampler state always matches its model"),
        }
    }

    pub fn next(&mut self, rng: &mut Stream) -> Result<u64> {
        self.next_with_mean(rng).map(|(e, _)| e)
    }
}

/// `ε_1..ε_length` of row `n`.
pub fn sample_row(model: &ImmigrationModel, n: usize, length: usize, rng: &mut Stream) -> Result<Vec<u64>> {
    if length == 0 {
        return Err(Error::InvalidParameter("row length must be at least 1".into()));
    }
    let mut sampler = model.sampler(n, rng)?;
    (0..length).map(|_| sampler.next(rng)).collect()
}

/// Monte Carlo check of `|cov(ε_k, ε_{k+lag})| ≤ ψ(lag) E|ε_k| E|ε_{k+lag}|`,
/// allowing `se_multiple` standard errors of slack.
pub fn verify_lemma8(
    model: &ImmigrationModel,
    n: usize,
    k: usize,
    lag: usize,
    replicates: usize,
    seed: u64,
    se_multiple: f64,
) -> Result<TestReport> {
    if k == 0 || lag == 0 || replicates < 2 {
        return Err(Error::InvalidParameter(
            "lemma 8 check needs k ≥ 1, lag ≥ 1 and at least two replicates".into(),
        ));
    }
    let bound_factor = model.psi_bound(lag);
    if !bound_factor.is_finite() {
        return Err(Error::InvalidParameter(format!("psi bound at lag {lag} is not finite")));
    }
    let pairs: Vec<(f64, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, n, Purpose::Immigration, r);
            let row = sample_row(model, n, k + lag, &mut rng)?;
            Ok((row[k - 1] as f64, row[k + lag - 1] as f64))
        })
        .collect::<Result<_>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let cov = covariance_estimate(&xs, &ys)?;
    let (ax, ay) = (model.mean(n, k), model.mean(n, k + lag));
    let bound = bound_factor * ax.abs() * ay.abs();
    let se = cov.se.unwrap_or(0.0);
    let report = TestReport::new(
        format!("lemma8 covariance inequality (n={n}, k={k}, lag={lag})"),
        cov.value.abs(),
        bound,
        Comparison::AtMost { slack: se_multiple * se },
        cov.se,
    )
    .with_note(format!(
        "psi bound {bound_factor:.6e}; exact covariance {:.6e}; sample means {:.4}, {:.4}",
        model.cov_oracle(n, k + lag, k),
        mean(&xs),
        mean(&ys)
    ));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: f64) -> MarkovModulated {
        MarkovModulated::new(
            vec![vec![1.0 - p, p], vec![p, 1.0 - p]],
            vec![0.5, 1.5],
            MeanProfile::new(RegVarSeq::power(1.0), Perturbation::None),
        )
        .unwrap()
    }

    #[test]
    fn poisson_marginal() {
        let m = ImmigrationModel::independent_poisson(RegVarSeq::power(0.0).with_scale(3.5), Perturbation::None);
        assert_eq!(m.marginal_moments(10, 4), (3.5, 3.5));
        assert_eq!(m.cov_oracle(10, 5, 4), 0.0);
        assert_eq!(m.psi_bound(1), 0.0);
    }

    #[test]
    fn markov_collapses_with_unit_levels() {
        let mm = MarkovModulated::new(
            vec![vec![0.5, 0.5], vec![0.2, 0.8]],
            vec![2.0, 2.0],
            MeanProfile::new(RegVarSeq::power(1.0), Perturbation::None),
        )
        .unwrap();
        assert!(mm.levels().iter().all(|l| (l - 1.0).abs() < 1e-12));
        let m = ImmigrationModel::MarkovModulated(mm);
        let (a, b) = m.marginal_moments(100, 7);
        assert!((a - 7.0).abs() < 1e-12 && (b - 7.0).abs() < 1e-12);
        assert!(m.cov_oracle(100, 9, 7).abs() < 1e-12);
    }

    #[test]
    fn markov_stationary_levels_average_to_one() {
        let mm = MarkovModulated::new(
            vec![vec![0.6, 0.3, 0.1], vec![0.2, 0.5, 0.3], vec![0.3, 0.3, 0.4]],
            vec![1.0, 2.0, 5.0],
            MeanProfile::new(RegVarSeq::power(1.0), Perturbation::None),
        )
        .unwrap();
        let avg: f64 = mm.stationary().iter().zip(mm.levels()).map(|(p, l)| p * l).sum();
        assert!((avg - 1.0).abs() < 1e-12);
        // πP = π
        let s = mm.stationary();
        for j in 0..3 {
            let pj: f64 = (0..3).map(|i| s[i] * mm.transition()[i][j]).sum();
            assert!((pj - s[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn two_state_psi_bound_halves_and_dominates_exact() {
        let mm = two_state(0.25);
        assert!((mm.doeblin() - 0.5).abs() < 1e-15);
        let m = ImmigrationModel::MarkovModulated(mm.clone());
        for lag in 1..=5 {
            assert!((m.psi_bound(lag + 1) / m.psi_bound(lag) - 0.5).abs() < 1e-12);
            let exact = chain_psi(&mm, lag);
            assert!((exact - 0.5f64.powi(lag as i32)).abs() < 1e-12);
            assert!(exact <= m.psi_bound(lag));
        }
    }

    #[test]
    fn markov_without_minorization_is_rejected() {
        let err = MarkovModulated::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 2.0],
            MeanProfile::new(RegVarSeq::power(1.0), Perturbation::None),
        );
        assert!(err.is_err());
    }

    #[test]
    fn block_sum_moments() {
        let m = ImmigrationModel::block_sum(1, Innovation::Poisson, RegVarSeq::power(0.0).with_scale(4.0), Perturbation::None);
        assert_eq!(m.marginal_moments(50, 3), (4.0, 4.0));
        assert_eq!(m.cov_oracle(50, 4, 3), 2.0);
        assert_eq!(m.cov_oracle(50, 5, 3), 0.0);
        assert_eq!(m.psi_bound(2), 0.0);
        assert_eq!(m.psi_bound(1), DEFAULT_PSI_CAP);
    }

    #[test]
    fn block_sum_mean_is_moving_average() {
        let m = ImmigrationModel::block_sum(3, Innovation::Poisson, RegVarSeq::power(1.0), Perturbation::None);
        // c_l = max(l,1)/4 over l = k-3..k
        assert_eq!(m.marginal_moments(10, 1).0, 1.0);
        assert_eq!(m.marginal_moments(10, 2).0, 1.25);
        assert_eq!(m.marginal_moments(10, 10).0, 8.5);
    }

    #[test]
    fn two_point_marginal() {
        let m = ImmigrationModel::two_point(Perturbation::None);
        assert_eq!(m.marginal_moments(1000, 1), (0.0, 0.0));
        let k = 100usize;
        let v = (k as f64 * (k as f64).ln().powi(2)).floor();
        let p = 1.0 / (k as f64).ln();
        let (a, b) = m.marginal_moments(1000, k);
        assert!((a - v * p).abs() < 1e-9);
        assert!((b - v * v * p * (1.0 - p)).abs() < 1e-6);
    }

    #[test]
    fn poisson_mean_limits() {
        let mut rng = stream(1, 1, Purpose::Immigration, 0);
        assert_eq!(poisson(0.0, &mut rng).unwrap(), 0);
        assert!(matches!(poisson(2e12, &mut rng), Err(Error::PoissonMean(_))));
    }

    #[test]
    fn block_sum_sampler_conditional_mean() {
        let m = ImmigrationModel::block_sum(2, Innovation::Poisson, RegVarSeq::power(0.0).with_scale(3.0), Perturbation::None);
        let mut rng = stream(9, 10, Purpose::Immigration, 0);
        let mut s = m.sampler(10, &mut rng).unwrap();
        for _ in 0..20 {
            let (e, cm) = s.next_with_mean(&mut rng).unwrap();
            // conditional mean = carried innovations + fresh innovation mean 1
            assert!(cm >= 1.0 && (e as f64) >= cm - 1.0);
        }
    }
}
