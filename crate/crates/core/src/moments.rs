//! Exact finite-n moments of the process and their scaled limits.
//!
//! With `a = a_n`, `b = b_n`, `α_k = α(n,k)`, `β_k = β(n,k)`:
//!
//! ```text
//! A(k)  = a A(k-1) + α_k
//! Δ²(k) = a² Δ²(k-1) + b A(k-1)
//! σ²(k) = a² σ²(k-1) + β_k
//! ω(k)  = a² ω(k-1) + Σ_{i<k} cov(ε_k, ε_i) a^{k-i}
//! B²(k) = Δ²(k) + σ²(k) + 2 ω(k)
//! ```
//!
//! The recursions are unrolled forms of the closed double sums and are run in
//! double-double arithmetic. The `ω` update only visits lags inside the
//! covariance bandwidth of the immigration model.

use twofloat::TwoFloat;

use crate::error::{Error, Result};
use crate::limits::{lambda_beta, mu_alpha, mu_beta, nu_over_a, DriftParam};
use crate::quadrature::integrate;
use crate::regvar::{floor_product, RegVarSeq};

pub trait OffspringMoments {
    /// `a_n`
    fn mean(&self, n: usize) -> f64;
    /// `b_n`
    fn variance(&self, n: usize) -> f64;
}

pub trait ImmigrationMoments {
    /// `α(n,k)`
    fn mean(&self, n: usize, k: usize) -> f64;
    /// `β(n,k)`
    fn variance(&self, n: usize, k: usize) -> f64;
    /// `cov(ε_j, ε_i)` for `j > i ≥ 1`.
    fn covariance(&self, n: usize, j: usize, i: usize) -> f64;
    /// `Some(m)` when the row is m-dependent.
    fn dependence_range(&self) -> Option<usize>;
    /// Largest lag with a nonnegligible covariance; `None` means unbounded.
    fn covariance_bandwidth(&self) -> Option<usize> {
        self.dependence_range()
    }
}

type SeqFn = Box<dyn Fn(usize) -> f64 + Send + Sync>;
type ArrayFn = Box<dyn Fn(usize, usize) -> f64 + Send + Sync>;
type CovFn = Box<dyn Fn(usize, usize, usize) -> f64 + Send + Sync>;

/// Offspring moments given directly as functions of `n`.
pub struct OffspringFns {
    mean: SeqFn,
    variance: SeqFn,
}

impl OffspringFns {
    pub fn new(
        mean: impl Fn(usize) -> f64 + Send + Sync + 'static,
        variance: impl Fn(usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            mean: Box::new(mean),
            variance: Box::new(variance),
        }
    }

    /// `a_n = 1 + a/n`, constant `b_n`.
    pub fn near_critical(a: f64, b: f64) -> Self {
        Self::new(move |n| 1.0 + a / n as f64, move |_| b)
    }
}

impl OffspringMoments for OffspringFns {
    fn mean(&self, n: usize) -> f64 {
        (self.mean)(n)
    }
    fn variance(&self, n: usize) -> f64 {
        (self.variance)(n)
    }
}

/// Immigration moments given directly as functions.
pub struct ImmigrationFns {
    mean: ArrayFn,
    variance: ArrayFn,
    covariance: Option<(CovFn, Option<usize>)>,
}

impl ImmigrationFns {
    pub fn independent(
        mean: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
        variance: impl Fn(usize, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            mean: Box::new(mean),
            variance: Box::new(variance),
            covariance: None,
        }
    }

    /// Adds a covariance; `range = Some(m)` declares it zero beyond lag `m`.
    pub fn with_covariance(
        mut self,
        cov: impl Fn(usize, usize, usize) -> f64 + Send + Sync + 'static,
        range: Option<usize>,
    ) -> Self {
        self.covariance = Some((Box::new(cov), range));
        self
    }
}

impl ImmigrationMoments for ImmigrationFns {
    fn mean(&self, n: usize, k: usize) -> f64 {
        (self.mean)(n, k)
    }
    fn variance(&self, n: usize, k: usize) -> f64 {
        (self.variance)(n, k)
    }
    fn covariance(&self, n: usize, j: usize, i: usize) -> f64 {
        match &self.covariance {
            Some((f, range)) => match range {
                Some(m) if j - i > *m => 0.0,
                _ => f(n, j, i),
            },
            None => 0.0,
        }
    }
    fn dependence_range(&self) -> Option<usize> {
        match &self.covariance {
            None => Some(0),
            Some((_, range)) => *range,
        }
    }
}

/// `Σ_{i=0}^{j-1} a^i`, equal to `j` at `a = 1` and continuous there.
pub fn geom_ratio(a: f64, j: usize) -> f64 {
    if j == 0 {
        return 0.0;
    }
    let d = a - 1.0;
    if d == 0.0 {
        return j as f64;
    }
    if j <= 32 {
        let mut s = 0.0;
        for _ in 0..j {
            s = s * a + 1.0;
        }
        return s;
    }
    (j as f64 * d.ln_1p()).exp_m1() / d
}

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

fn checked(v: TwoFloat, k: usize, a_n: f64) -> Result<TwoFloat> {
    if v.hi().is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { k, a_n })
    }
}

/// `A_n(k) = Σ_{j=1}^k a_n^{k-j} α(n,j)`.
pub fn mean_a<O, I>(off: &O, imm: &I, n: usize, k: usize) -> Result<f64>
where
    O: OffspringMoments + ?Sized,
    I: ImmigrationMoments + ?Sized,
{
    let a_n = off.mean(n);
    let a = dd(a_n);
    let mut acc = dd(0.0);
    for j in 1..=k {
        acc = checked(acc * a + imm.mean(n, j), j, a_n)?;
    }
    Ok(acc.hi() + acc.lo())
}

/// Mean and variance decomposition of `X_k` for `k = 0..=K` in row `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTables {
    pub n: usize,
    pub a_n: f64,
    pub b_n: f64,
    /// `α(n,k)`, index 0 unused.
    pub alpha: Vec<f64>,
    /// `β(n,k)`, index 0 unused.
    pub beta: Vec<f64>,
    pub mean: Vec<f64>,
    pub delta2: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub omega: Vec<f64>,
    pub b2: Vec<f64>,
}

impl MomentTables {
    pub fn max_generation(&self) -> usize {
        self.mean.len() - 1
    }

    /// `A(n) = A_n(n)`.
    pub fn big_a(&self) -> Result<f64> {
        self.mean
            .get(self.n)
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("tables stop before generation n = {}", self.n)))
    }

    /// `B(n) = sqrt(B_n²(n))`.
    pub fn big_b(&self) -> Result<f64> {
        self.b2
            .get(self.n)
            .map(|v| v.max(0.0).sqrt())
            .ok_or_else(|| Error::InvalidParameter(format!("tables stop before generation n = {}", self.n)))
    }

    /// `m · Σ_{k ≤ ⌊nT⌋} a_n^{-2k} β(n,k) / B²(n)`, the L² bound on the
    /// conditional-mean drift term without its unspecified constant.
    pub fn l2_proxy(&self, m: usize, horizon: f64) -> Result<f64> {
        let upper = floor_product(self.n, horizon).min(self.max_generation());
        let b2 = self.big_b()?.powi(2);
        if !(b2 > 0.0) {
            return Err(Error::DegenerateNormalization(b2));
        }
        let inv2 = (self.a_n * self.a_n).recip();
        let mut w = 1.0;
        let mut s = 0.0;
        for k in 1..=upper {
            w *= inv2;
            s += w * self.beta[k];
        }
        Ok(m.max(1) as f64 * s / b2)
    }
}

/// Builds [`MomentTables`] for `k = 0..=max_gen`.
pub fn var_tables<O, I>(off: &O, imm: &I, n: usize, max_gen: usize) -> Result<MomentTables>
where
    O: OffspringMoments + ?Sized,
    I: ImmigrationMoments + ?Sized,
{
    if max_gen == 0 {
        return Err(Error::InvalidParameter("moment tables need at least one generation".into()));
    }
    let a_n = off.mean(n);
    let b_n = off.variance(n);
    if !(b_n >= 0.0) {
        return Err(Error::InvalidParameter(format!("offspring variance must be nonnegative, got {b_n}")));
    }
    let a = dd(a_n);
    let a2 = a * a;
    let bandwidth = imm.covariance_bandwidth().unwrap_or(max_gen).min(max_gen);
    let mut powers = Vec::with_capacity(bandwidth + 1);
    powers.push(dd(1.0));
    for d in 1..=bandwidth {
        let next = checked(powers[d - 1] * a, d, a_n)?;
        powers.push(next);
    }

    let len = max_gen + 1;
    let mut alpha = vec![0.0; len];
    let mut beta = vec![0.0; len];
    let mut mean = vec![0.0; len];
    let mut delta2 = vec![0.0; len];
    let mut sigma2 = vec![0.0; len];
    let mut omega = vec![0.0; len];
    let mut b2 = vec![0.0; len];

    let (mut am, mut dl, mut sg, mut om) = (dd(0.0), dd(0.0), dd(0.0), dd(0.0));
    for k in 1..=max_gen {
        let ak = imm.mean(n, k);
        let bk = imm.variance(n, k);
        alpha[k] = ak;
        beta[k] = bk;
        dl = checked(dl * a2 + am * b_n, k, a_n)?;
        am = checked(am * a + ak, k, a_n)?;
        sg = checked(sg * a2 + bk, k, a_n)?;
        let mut cross = dd(0.0);
        let lo = k.saturating_sub(bandwidth).max(1);
        for i in lo..k {
            let c = imm.covariance(n, k, i);
            if c != 0.0 {
                cross += powers[k - i] * c;
            }
        }
        om = checked(om * a2 + cross, k, a_n)?;
        let total = dl + sg + om * 2.0;
        mean[k] = am.into();
        delta2[k] = dl.into();
        sigma2[k] = sg.into();
        omega[k] = om.into();
        b2[k] = total.into();
    }
    Ok(MomentTables {
        n,
        a_n,
        b_n,
        alpha,
        beta,
        mean,
        delta2,
        sigma2,
        omega,
        b2,
    })
}

/// First two moments of a Galton–Watson process started from one individual
/// after `k` generations: `(a^k, a^{k-1} b Σ_{i<k} a^i + a^{2k})`.
pub fn y_moments<O: OffspringMoments + ?Sized>(off: &O, n: usize, k: usize) -> (f64, f64) {
    if k == 0 {
        return (1.0, 1.0);
    }
    let a = off.mean(n);
    let b = off.variance(n);
    let ak = a.powi(k as i32);
    let second = a.powi(k as i32 - 1) * geom_ratio(a, k) * b + ak * ak;
    (ak, second)
}

/// One scaled quantity compared with its limit curve on a grid of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub name: String,
    pub s_grid: Vec<f64>,
    pub scaled: Vec<f64>,
    pub limit: Vec<f64>,
    pub max_deviation: f64,
}

impl LimitCheck {
    fn new(name: &str, s_grid: &[f64], scaled: Vec<f64>, limit: Vec<f64>) -> Self {
        let max_deviation = scaled
            .iter()
            .zip(&limit)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        Self {
            name: name.to_string(),
            s_grid: s_grid.to_vec(),
            scaled,
            limit,
            max_deviation,
        }
    }
}

/// The targets `α(k)`, `β(k)` whose values at `n` normalise the scaled sums.
#[derive(Debug, Clone, Copy)]
pub struct Normalizers<'a> {
    pub alpha: &'a RegVarSeq,
    pub beta: &'a RegVarSeq,
}

fn validate_grid(s_grid: &[f64]) -> Result<f64> {
    if s_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParameter("s grid must be finite and nonnegative".into()));
    }
    Ok(s_grid.iter().copied().fold(0.0, f64::max))
}

fn curve_on_grid(s_grid: &[f64], f: impl Fn(f64) -> Result<f64>) -> Result<Vec<f64>> {
    s_grid.iter().map(|&s| f(s)).collect()
}

/// Scaled mean, branching variance and immigration variance against their
/// limit curves.
///
/// The immigration-variance sum carries the weights `a_n^{2(k-j)}`, whose
/// limit kernel is `e^{2a(s-u)}` (`lambda_beta`). The `mu_beta` comparison is
/// reported alongside under the name `sigma2/(n beta(n)) vs mu_beta`.
pub fn lemma5_check<O, I>(
    off: &O,
    imm: &I,
    norm: Normalizers<'_>,
    p: &DriftParam,
    n: usize,
    s_grid: &[f64],
) -> Result<Vec<LimitCheck>>
where
    O: OffspringMoments + ?Sized,
    I: ImmigrationMoments + ?Sized,
{
    let s_max = validate_grid(s_grid)?;
    let tables = var_tables(off, imm, n, floor_product(n, s_max).max(1))?;
    let nf = n as f64;
    let alpha_n = norm.alpha.eval(n);
    let beta_n = norm.beta.eval(n);
    let b_n = tables.b_n;
    let at = |s: f64| floor_product(n, s);

    let mean_scaled = s_grid.iter().map(|&s| tables.mean[at(s)] / (nf * alpha_n)).collect();
    let delta_scaled = s_grid
        .iter()
        .map(|&s| tables.delta2[at(s)] / (nf * nf * alpha_n * b_n))
        .collect();
    let sigma_scaled: Vec<f64> = s_grid.iter().map(|&s| tables.sigma2[at(s)] / (nf * beta_n)).collect();

    Ok(vec![
        LimitCheck::new(
            "A_n/(n alpha(n)) vs mu_alpha",
            s_grid,
            mean_scaled,
            curve_on_grid(s_grid, |s| mu_alpha(p, s))?,
        ),
        LimitCheck::new(
            "Delta2/(n^2 alpha(n) b_n) vs nu_over_a",
            s_grid,
            delta_scaled,
            curve_on_grid(s_grid, |s| nu_over_a(p, s))?,
        ),
        LimitCheck::new(
            "sigma2/(n beta(n)) vs lambda_beta",
            s_grid,
            sigma_scaled.clone(),
            curve_on_grid(s_grid, |s| lambda_beta(p, s))?,
        ),
        LimitCheck::new(
            "sigma2/(n beta(n)) vs mu_beta",
            s_grid,
            sigma_scaled,
            curve_on_grid(s_grid, |s| mu_beta(p, s))?,
        ),
    ])
}

fn weighted_curve_integral(
    s: f64,
    theta_a: f64,
    curve: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let v = integrate(
        |u| (u * theta_a).exp() * curve(u).unwrap_or(f64::NAN),
        0.0,
        s,
        1e-9,
    )?;
    if v.value.is_finite() {
        Ok(v.value)
    } else {
        Err(Error::InvalidParameter(format!("limit integral is not finite at s = {s}")))
    }
}

/// Weighted cumulative sums `Σ_{i ≤ ⌊ns⌋} a_n^{θi} X(i)` of the mean and
/// variance tables against their limit integrals.
pub fn lemma6_check<O, I>(
    off: &O,
    imm: &I,
    norm: Normalizers<'_>,
    p: &DriftParam,
    n: usize,
    theta: f64,
    s_grid: &[f64],
) -> Result<Vec<LimitCheck>>
where
    O: OffspringMoments + ?Sized,
    I: ImmigrationMoments + ?Sized,
{
    let s_max = validate_grid(s_grid)?;
    let upper = floor_product(n, s_max).max(1);
    let tables = var_tables(off, imm, n, upper)?;
    let nf = n as f64;
    let alpha_n = norm.alpha.eval(n);
    let beta_n = norm.beta.eval(n);
    let log_a = tables.a_n.ln();

    let cumulative = |col: &[f64]| {
        let mut out = vec![0.0; upper + 1];
        let mut acc = dd(0.0);
        for i in 1..=upper {
            acc += dd((theta * i as f64 * log_a).exp()) * col[i];
            out[i] = acc.into();
        }
        out
    };
    let cum_delta = cumulative(&tables.delta2);
    let cum_sigma = cumulative(&tables.sigma2);
    let cum_mean = cumulative(&tables.mean);
    let at = |s: f64| floor_product(n, s);
    let ta = theta * p.a;

    let sigma_scaled: Vec<f64> = s_grid
        .iter()
        .map(|&s| cum_sigma[at(s)] / (nf * nf * beta_n))
        .collect();
    Ok(vec![
        LimitCheck::new(
            "sum a^(theta i) Delta2(i)/(n^3 alpha(n) b_n)",
            s_grid,
            s_grid
                .iter()
                .map(|&s| cum_delta[at(s)] / (nf * nf * nf * alpha_n * tables.b_n))
                .collect(),
            curve_on_grid(s_grid, |s| weighted_curve_integral(s, ta, |u| nu_over_a(p, u)))?,
        ),
        LimitCheck::new(
            "sum a^(theta i) sigma2(i)/(n^2 beta(n)) vs lambda_beta",
            s_grid,
            sigma_scaled.clone(),
            curve_on_grid(s_grid, |s| weighted_curve_integral(s, ta, |u| lambda_beta(p, u)))?,
        ),
        LimitCheck::new(
            "sum a^(theta i) sigma2(i)/(n^2 beta(n)) vs mu_beta",
            s_grid,
            sigma_scaled,
            curve_on_grid(s_grid, |s| weighted_curve_integral(s, ta, |u| mu_beta(p, u)))?,
        ),
        LimitCheck::new(
            "sum a^(theta i) A(i)/(n^2 alpha(n))",
            s_grid,
            s_grid
                .iter()
                .map(|&s| cum_mean[at(s)] / (nf * nf * alpha_n))
                .collect(),
            curve_on_grid(s_grid, |s| weighted_curve_integral(s, ta, |u| mu_alpha(p, u)))?,
        ),
    ])
}

/// `sup_s |(1/(n x(n))) Σ_{k ≤ ⌊ns⌋} a_n^{kθ} x(k) − ∫_0^s t^ρ e^{tθa} dt|` on the grid.
pub fn lemma4_check<O: OffspringMoments + ?Sized>(
    x: &RegVarSeq,
    off: &O,
    drift: f64,
    theta: f64,
    n: usize,
    s_grid: &[f64],
) -> Result<LimitCheck> {
    let s_max = validate_grid(s_grid)?;
    let upper = floor_product(n, s_max);
    let log_a = off.mean(n).ln();
    let norm = n as f64 * x.eval(n);
    let mut cum = Vec::with_capacity(upper + 1);
    cum.push(0.0);
    let mut acc = dd(0.0);
    for k in 1..=upper {
        acc += dd((theta * k as f64 * log_a).exp()) * x.eval(k);
        cum.push(acc.into());
    }
    let rho = x.index;
    let scaled = s_grid.iter().map(|&s| cum[floor_product(n, s)] / norm).collect();
    let limit = curve_on_grid(s_grid, |s| {
        Ok(integrate(
            |t| if rho == 0.0 { 1.0 } else { t.powf(rho) } * (t * theta * drift).exp(),
            0.0,
            s,
            1e-12,
        )?
        .value)
    })?;
    Ok(LimitCheck::new("lemma4 scaled sum", s_grid, scaled, limit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geom_ratio_examples() {
        assert_eq!(geom_ratio(1.0, 5), 5.0);
        assert_eq!(geom_ratio(2.0, 3), 7.0);
        assert_eq!(geom_ratio(0.5, 0), 0.0);
        assert_eq!(geom_ratio(0.0, 4), 1.0);
        assert!((geom_ratio(0.9, 100) - (1.0 - 0.9f64.powi(100)) / 0.1).abs() < 1e-12);
    }

    #[test]
    fn mean_a_examples() {
        let crit = OffspringFns::near_critical(0.0, 1.0);
        let constant = ImmigrationFns::independent(|_, _| 2.5, |_, _| 1.0);
        assert_eq!(mean_a(&crit, &constant, 10, 8).unwrap(), 20.0);
        let linear = ImmigrationFns::independent(|_, j| j as f64, |_, _| 1.0);
        assert_eq!(mean_a(&crit, &linear, 10, 100).unwrap(), 5050.0);
    }

    #[test]
    fn mean_a_overflow_is_reported() {
        let exploding = OffspringFns::new(|_| 1e300, |_| 0.0);
        let imm = ImmigrationFns::independent(|_, _| 1e10, |_, _| 0.0);
        assert!(matches!(
            mean_a(&exploding, &imm, 1, 5),
            Err(Error::Overflow { k: 2, .. })
        ));
    }

    #[test]
    fn hand_computed_tables() {
        let off = OffspringFns::new(|_| 1.0, |_| 1.0);
        let imm = ImmigrationFns::independent(|_, _| 1.0, |_, _| 1.0);
        let t = var_tables(&off, &imm, 3, 3).unwrap();
        assert_eq!(t.delta2[3], 3.0);
        assert_eq!(t.sigma2[3], 3.0);
        assert_eq!(t.b2[3], 6.0);
        assert!(t.omega.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn pure_immigration_variance() {
        let off = OffspringFns::new(|_| 1.0, |_| 0.0);
        let imm = ImmigrationFns::independent(|_, k| k as f64, |_, k| (k * k) as f64);
        let t = var_tables(&off, &imm, 5, 6).unwrap();
        for k in 1..=6 {
            let direct: f64 = (1..=k).map(|j| (j * j) as f64).sum();
            assert_eq!(t.b2[k], direct);
        }
    }

    #[test]
    fn tables_match_closed_sums() {
        // a_n = 0.97, moving-average style covariance with range 2
        let off = OffspringFns::new(|_| 0.97, |_| 0.4);
        let imm = ImmigrationFns::independent(|_, k| 1.0 + 0.3 * k as f64, |_, k| 0.5 + 0.1 * k as f64)
            .with_covariance(|_, j, i| 0.2 / (j - i) as f64, Some(2));
        let kmax = 40;
        let t = var_tables(&off, &imm, 7, kmax).unwrap();
        let a: f64 = 0.97;
        let b = 0.4;
        for k in [1usize, 2, 5, 17, 40] {
            let mean: f64 = (1..=k).map(|j| a.powi((k - j) as i32) * (1.0 + 0.3 * j as f64)).sum();
            let delta: f64 = (1..=k)
                .map(|j| (1.0 + 0.3 * j as f64) * a.powi(k as i32 - j as i32 - 1) * geom_ratio(a, k - j) * b)
                .sum();
            let sigma: f64 = (1..=k)
                .map(|j| (0.5 + 0.1 * j as f64) * a.powi(2 * (k - j) as i32))
                .sum();
            let mut omega = 0.0;
            for j in 2..=k {
                for i in 1..j {
                    if j - i <= 2 {
                        omega += 0.2 / (j - i) as f64 * a.powi((2 * k - j - i) as i32);
                    }
                }
            }
            assert!((t.mean[k] - mean).abs() < 1e-12 * mean.max(1.0));
            assert!((t.delta2[k] - delta).abs() < 1e-12 * delta.max(1.0), "k={k}");
            assert!((t.sigma2[k] - sigma).abs() < 1e-12 * sigma.max(1.0));
            assert!((t.omega[k] - omega).abs() < 1e-12 * omega.max(1.0));
            assert!((t.b2[k] - (delta + sigma + 2.0 * omega)).abs() < 1e-11 * t.b2[k]);
        }
    }

    #[test]
    fn y_moment_examples() {
        let any = OffspringFns::new(|_| 1.3, |_| 0.7);
        assert_eq!(y_moments(&any, 5, 0), (1.0, 1.0));
        let crit = OffspringFns::new(|_| 1.0, |_| 2.0);
        assert_eq!(y_moments(&crit, 5, 7), (1.0, 15.0));
        let doubling = OffspringFns::new(|_| 2.0, |_| 0.0);
        assert_eq!(y_moments(&doubling, 5, 3), (8.0, 64.0));
    }

    #[test]
    fn l2_proxy_of_independent_critical() {
        let off = OffspringFns::new(|_| 1.0, |_| 1.0);
        let imm = ImmigrationFns::independent(|_, _| 1.0, |_, _| 1.0);
        let t = var_tables(&off, &imm, 3, 3).unwrap();
        // m = 1: Σ β / B² = 3 / 6
        assert!((t.l2_proxy(1, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }
}
