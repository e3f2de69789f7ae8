//! Deterministic limit curves of the scaled process.
//!
//! With drift `a`, immigration-mean index `α` and immigration-variance index `β`:
//!
//! ```text
//! mu(t)     = ∫_0^t u^α e^{a(t-u)} du
//! nu(t)     = ∫_0^t u^α e^{a(t-u)} (1 - e^{a(t-u)}) du
//! lambda(t) = ∫_0^t u^β e^{2a(t-u)} du
//! pi(t)     = mu(t) / mu(1)
//! ```
//!
//! `nu` is nonpositive for every `a`, so the variance-type curves are built
//! from [`nu_over_a`], defined as `-nu(t)/a` (positive, with the a → 0 limit
//! `t^{α+2}/((α+1)(α+2))`). `phi` and `phi*` are normalised by
//! `nu_over_a(1)` and reduce to `t^{2+α}` at `a = 0`.
//!
//! Curves switch to their closed `a = 0` form when `|a| < 1e-8`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, DEFAULT_TOL};

/// Below this `|a|` the closed `a = 0` branch is used.
pub const CRITICAL_DRIFT_EPS: f64 = 1e-8;

/// Number of intervals in the memo table of `mu` used by `phi` and `phi*`.
pub const PHI_TABLE_INTERVALS: usize = 1024;

const DEFAULT_HORIZON: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParam {
    /// Drift of the offspring mean, `a_n = 1 + a/n + o(1/n)`.
    pub a: f64,
    /// Index of regular variation of the immigration mean.
    pub alpha: f64,
    /// Index of regular variation of the immigration variance.
    pub beta: f64,
}

impl DriftParam {
    pub fn new(a: f64, alpha: f64, beta: f64) -> Result<Self> {
        if !a.is_finite() || !(alpha >= 0.0) || !(beta >= 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drift parameters need finite a and alpha, beta >= 0 (got a={a}, alpha={alpha}, beta={beta})"
            )));
        }
        Ok(Self { a, alpha, beta })
    }

    pub fn is_critical(&self) -> bool {
        self.a.abs() < CRITICAL_DRIFT_EPS
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    MuAlpha,
    NuAlpha,
    NuOverA,
    LambdaBeta,
    Phi,
    PhiStar,
    PiAlpha,
}

impl CurveKind {
    pub const ALL: [CurveKind; 7] = [
        CurveKind::MuAlpha,
        CurveKind::NuAlpha,
        CurveKind::NuOverA,
        CurveKind::LambdaBeta,
        CurveKind::Phi,
        CurveKind::PhiStar,
        CurveKind::PiAlpha,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CurveKind::MuAlpha => "mu_alpha",
            CurveKind::NuAlpha => "nu_alpha",
            CurveKind::NuOverA => "nu_over_a",
            CurveKind::LambdaBeta => "lambda_beta",
            CurveKind::Phi => "phi",
            CurveKind::PhiStar => "phi_star",
            CurveKind::PiAlpha => "pi_alpha",
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time must be finite and nonnegative, got {t}")))
    }
}

/// `u^p` with `0^0 = 1`.
fn upow(u: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        u.powf(p)
    }
}

/// `∫_0^t u^p e^{c(t-u)} du`, closed form at `c = 0`.
fn weighted_power_integral(p: f64, c: f64, t: f64, tol: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if c.abs() < CRITICAL_DRIFT_EPS {
        return Ok(t.powf(p + 1.0) / (p + 1.0));
    }
    Ok(integrate(|u| upow(u, p) * (c * (t - u)).exp(), 0.0, t, tol)?.value)
}

pub fn mu_alpha(p: &DriftParam, t: f64) -> Result<f64> {
    mu_alpha_tol(p, t, DEFAULT_TOL)
}

pub fn mu_alpha_tol(p: &DriftParam, t: f64, tol: f64) -> Result<f64> {
    weighted_power_integral(p.alpha, p.a, t, tol)
}

pub fn nu_alpha(p: &DriftParam, t: f64) -> Result<f64> {
    nu_alpha_tol(p, t, DEFAULT_TOL)
}

pub fn nu_alpha_tol(p: &DriftParam, t: f64, tol: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 || p.a == 0.0 {
        return Ok(0.0);
    }
    let a = p.a;
    let v = integrate(
        |u| {
            let x = a * (t - u);
            -upow(u, p.alpha) * x.exp() * x.exp_m1()
        },
        0.0,
        t,
        tol,
    )?;
    Ok(v.value)
}

/// `-nu(t)/a`, the positive variance-growth curve of the branching part.
pub fn nu_over_a(p: &DriftParam, t: f64) -> Result<f64> {
    nu_over_a_tol(p, t, DEFAULT_TOL)
}

pub fn nu_over_a_tol(p: &DriftParam, t: f64, tol: f64) -> Result<f64> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    if p.is_critical() {
        let al = p.alpha;
        return Ok(t.powf(al + 2.0) / ((al + 1.0) * (al + 2.0)));
    }
    let a = p.a;
    let v = integrate(
        |u| {
            let x = a * (t - u);
            upow(u, p.alpha) * x.exp() * x.exp_m1() / a
        },
        0.0,
        t,
        tol,
    )?;
    Ok(v.value)
}

pub fn lambda_beta(p: &DriftParam, t: f64) -> Result<f64> {
    lambda_beta_tol(p, t, DEFAULT_TOL)
}

pub fn lambda_beta_tol(p: &DriftParam, t: f64, tol: f64) -> Result<f64> {
    weighted_power_integral(p.beta, 2.0 * p.a, t, tol)
}

/// `mu` with `β` in place of `α`; the alternative reading of the σ² limit.
pub fn mu_beta(p: &DriftParam, t: f64) -> Result<f64> {
    weighted_power_integral(p.beta, p.a, t, DEFAULT_TOL)
}

pub fn pi_alpha(p: &DriftParam, t: f64) -> Result<f64> {
    check_time(t)?;
    if t == 1.0 {
        return Ok(1.0);
    }
    Ok(mu_alpha(p, t)? / mu_alpha(p, 1.0)?)
}

pub fn phi(p: &DriftParam, t: f64) -> Result<f64> {
    check_time(t)?;
    if p.is_critical() {
        return Ok(t.powf(2.0 + p.alpha));
    }
    MuTable::new(p, t.max(1.0), DEFAULT_TOL)?.phi(t)
}

pub fn phi_star(p: &DriftParam, t: f64) -> Result<f64> {
    check_time(t)?;
    if p.is_critical() {
        return Ok(t.powf(2.0 + p.alpha));
    }
    MuTable::new(p, t.max(1.0), DEFAULT_TOL)?.phi_star(t)
}

/// `mu` tabulated on a uniform grid and interpolated by cubic Hermite pieces
/// with the exact derivative `mu'(t) = t^α + a·mu(t)`.
#[derive(Debug, Clone)]
pub struct MuTable {
    params: DriftParam,
    tol: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
    nu_norm: f64,
}

impl MuTable {
    pub fn new(p: &DriftParam, horizon: f64, tol: f64) -> Result<Self> {
        check_time(horizon)?;
        let horizon = horizon.max(f64::MIN_POSITIVE);
        let step = horizon / PHI_TABLE_INTERVALS as f64;
        let mut values = Vec::with_capacity(PHI_TABLE_INTERVALS + 1);
        values.push(0.0);
        // mu(t + h) = e^{ah} mu(t) + ∫_t^{t+h} u^α e^{a(t+h-u)} du
        for i in 1..=PHI_TABLE_INTERVALS {
            let lo = (i - 1) as f64 * step;
            let hi = i as f64 * step;
            let piece = integrate(|u| upow(u, p.alpha) * (p.a * (hi - u)).exp(), lo, hi, tol)?.value;
            let prev = values[i - 1];
            values.push((p.a * step).exp() * prev + piece);
        }
        let slopes = values
            .iter()
            .enumerate()
            .map(|(i, v)| upow(i as f64 * step, p.alpha) + p.a * v)
            .collect();
        let nu_norm = nu_over_a_tol(p, 1.0, tol)?;
        Ok(Self {
            params: *p,
            tol,
            step,
            values,
            slopes,
            nu_norm,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.step * PHI_TABLE_INTERVALS as f64
    }

    /// Interpolated `mu(t)` for `0 ≤ t ≤ horizon`.
    pub fn mu(&self, t: f64) -> f64 {
        let x = (t / self.step).max(0.0);
        let i = (x.floor() as usize).min(PHI_TABLE_INTERVALS - 1);
        let s = x - i as f64;
        let h = self.step;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (d0, d1) = (self.slopes[i] * h, self.slopes[i + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * d0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * d1
    }

    fn weighted_mu_integral<W: Fn(f64) -> f64>(&self, t: f64, weight: W) -> Result<f64> {
        if t > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "t = {t} lies beyond the tabulated horizon {}",
                self.horizon()
            )));
        }
        let mut total = 0.0;
        let mut lo = 0.0;
        let mut i = 0;
        while lo < t {
            i += 1;
            let hi = (i as f64 * self.step).min(t);
            total += integrate(|u| self.mu(u) * weight(u), lo, hi, self.tol)?.value;
            lo = hi;
        }
        Ok(total)
    }

    /// `phi(t) = (∫_0^t mu(u) e^{2a(t-u)} du) / nu_over_a(1)`.
    pub fn phi(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if self.params.is_critical() {
            return Ok(t.powf(2.0 + self.params.alpha));
        }
        let a = self.params.a;
        Ok(self.weighted_mu_integral(t, |u| (2.0 * a * (t - u)).exp())? / self.nu_norm)
    }

    /// `phi*(t) = (∫_0^t mu(u) e^{-2au} du) / nu_over_a(1)`.
    pub fn phi_star(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        if self.params.is_critical() {
            return Ok(t.powf(2.0 + self.params.alpha));
        }
        let a = self.params.a;
        Ok(self.weighted_mu_integral(t, |u| (-2.0 * a * u).exp())? / self.nu_norm)
    }
}

/// All limit curves for one parameter set, sharing a lazily built `mu` table.
#[derive(Debug)]
pub struct LimitCurves {
    pub params: DriftParam,
    pub quad_tol: f64,
    horizon: f64,
    table: OnceLock<Result<MuTable>>,
}

impl LimitCurves {
    pub fn new(params: DriftParam) -> Self {
        Self::with_horizon(params, DEFAULT_HORIZON, DEFAULT_TOL)
    }

    pub fn with_horizon(params: DriftParam, horizon: f64, quad_tol: f64) -> Self {
        Self {
            params,
            quad_tol,
            horizon: horizon.max(1.0),
            table: OnceLock::new(),
        }
    }

    fn table(&self) -> Result<&MuTable> {
        self.table
            .get_or_init(|| MuTable::new(&self.params, self.horizon, self.quad_tol))
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn eval(&self, kind: CurveKind, t: f64) -> Result<f64> {
        let p = &self.params;
        let tol = self.quad_tol;
        match kind {
            CurveKind::MuAlpha => mu_alpha_tol(p, t, tol),
            CurveKind::NuAlpha => nu_alpha_tol(p, t, tol),
            CurveKind::NuOverA => nu_over_a_tol(p, t, tol),
            CurveKind::LambdaBeta => lambda_beta_tol(p, t, tol),
            CurveKind::PiAlpha => pi_alpha(p, t),
            CurveKind::Phi | CurveKind::PhiStar => {
                check_time(t)?;
                if p.is_critical() {
                    return Ok(t.powf(2.0 + p.alpha));
                }
                let owned;
                let table = if t <= self.horizon {
                    self.table()?
                } else {
                    owned = MuTable::new(p, t, tol)?;
                    &owned
                };
                if kind == CurveKind::Phi {
                    table.phi(t)
                } else {
                    table.phi_star(t)
                }
            }
        }
    }

    /// Samples a curve on `points + 1` equally spaced times in `[0, horizon]`.
    pub fn sample(&self, kind: CurveKind, horizon: f64, points: usize) -> Result<Vec<(f64, f64)>> {
        (0..=points)
            .map(|j| {
                let t = horizon * j as f64 / points as f64;
                Ok((t, self.eval(kind, t)?))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn p(a: f64, alpha: f64, beta: f64) -> DriftParam {
        DriftParam::new(a, alpha, beta).unwrap()
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu_alpha(&p(0.0, 0.0, 0.0), 1.0).unwrap(), 1.0);
        assert_eq!(mu_alpha(&p(0.0, 1.0, 0.0), 2.0).unwrap(), 2.0);
        let v = mu_alpha(&p(1.0, 0.0, 0.0), 1.0).unwrap();
        assert!((v - (E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn nu_examples() {
        assert!((nu_over_a(&p(0.0, 0.0, 0.0), 1.0).unwrap() - 0.5).abs() < 1e-15);
        for alpha in [0.0, 1.5, 3.0] {
            assert_eq!(nu_alpha(&p(0.0, alpha, 0.0), 2.0).unwrap(), 0.0);
        }
        // ∫_0^1 e^{1-u}(1 - e^{1-u}) du = (e - 1) - (e² - 1)/2
        let oracle = (E - 1.0) - (E * E - 1.0) / 2.0;
        let v = nu_alpha(&p(1.0, 0.0, 0.0), 1.0).unwrap();
        assert!((v - oracle).abs() < 1e-12);
        assert!((v + 1.476).abs() < 1e-3);
        assert!((nu_over_a(&p(1.0, 0.0, 0.0), 1.0).unwrap() + oracle).abs() < 1e-12);
        assert!(nu_over_a(&p(-1.0, 0.0, 0.0), 1.0).unwrap() > 0.0);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_beta(&p(0.0, 0.0, 0.0), 3.0).unwrap(), 3.0);
        assert_eq!(lambda_beta(&p(0.0, 0.0, 1.0), 1.0).unwrap(), 0.5);
        let v = lambda_beta(&p(0.5, 0.0, 0.0), 1.0).unwrap();
        assert!((v - (E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&p(0.0, 0.0, 0.0), 1.0).unwrap(), 1.0);
        assert_eq!(phi(&p(0.0, 1.0, 0.0), 0.5).unwrap(), 0.125);
        let v = phi(&p(1e-6, 0.0, 0.0), 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-4);
    }

    #[test]
    fn phi_star_examples() {
        assert_eq!(phi_star(&p(0.0, 0.0, 0.0), 1.0).unwrap(), 1.0);
        assert_eq!(phi_star(&p(0.0, 2.0, 0.0), 1.0).unwrap(), 1.0);
        // ∫_0^1 (e^u - 1) e^{-2u} du / nu_over_a(1), both by antiderivative
        let num = (1.0 - (-1.0f64).exp()) - (1.0 - (-2.0f64).exp()) / 2.0;
        let den = (E * E - 1.0) / 2.0 - (E - 1.0);
        let v = phi_star(&p(1.0, 0.0, 0.0), 1.0).unwrap();
        assert!((v - num / den).abs() < 1e-9, "{v} vs {}", num / den);
    }

    #[test]
    fn pi_examples() {
        assert!((pi_alpha(&p(0.0, 1.0, 0.0), 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(pi_alpha(&p(-0.7, 2.5, 0.0), 1.0).unwrap(), 1.0);
        let v = pi_alpha(&p(1.0, 0.0, 0.0), 0.5).unwrap();
        assert!((v - (0.5f64.exp() - 1.0) / (E - 1.0)).abs() < 1e-12);
        assert!((v - 0.37754).abs() < 1e-5);
    }

    #[test]
    fn curves_vanish_at_zero() {
        let c = LimitCurves::new(p(0.8, 1.5, 0.5));
        for kind in CurveKind::ALL {
            assert_eq!(c.eval(kind, 0.0).unwrap(), 0.0, "{}", kind.name());
        }
    }

    #[test]
    fn phi_reaches_one_at_one() {
        for a in [-1.0, 0.5, 2.0] {
            let c = LimitCurves::new(p(a, 1.0, 1.0));
            let v = c.eval(CurveKind::Phi, 1.0).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "a={a}: {v}");
        }
    }

    #[test]
    fn rejects_negative_time() {
        assert!(mu_alpha(&p(0.0, 0.0, 0.0), -1.0).is_err());
        assert!(DriftParam::new(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn beyond_horizon_builds_a_larger_table() {
        let c = LimitCurves::with_horizon(p(0.5, 1.0, 1.0), 1.0, DEFAULT_TOL);
        let direct = phi(&p(0.5, 1.0, 1.0), 3.0).unwrap();
        assert!((c.eval(CurveKind::Phi, 3.0).unwrap() - direct).abs() < 1e-12);
    }
}
