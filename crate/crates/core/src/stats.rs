//! Sample summaries with Monte Carlo standard errors, and the one-sample
//! Kolmogorov–Smirnov test against a centred normal law.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A sample estimate with its standard error (`None` when undefined, R < 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: Option<f64>,
}

impl Estimate {
    /// Number of standard errors separating the estimate from `reference`.
    pub fn z_score(&self, reference: f64) -> Option<f64> {
        self.se.map(|se| {
            let d = (self.value - reference).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean with standard error `sd/√R`.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let r = xs.len();
    let m = mean(xs);
    let se = (r >= 2).then(|| (central_moment(xs, m, 2) * r as f64 / (r - 1) as f64 / r as f64).sqrt());
    Estimate { value: m, se }
}

fn central_moment(xs: &[f64], m: f64, p: i32) -> f64 {
    xs.iter().map(|x| (x - m).powi(p)).sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance with standard error `sqrt((m4 − s⁴)/R)`.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let r = xs.len();
    if r < 2 {
        return Estimate {
            value: if r == 1 { 0.0 } else { f64::NAN },
            se: None,
        };
    }
    let m = mean(xs);
    let m2 = central_moment(xs, m, 2);
    let m4 = central_moment(xs, m, 4);
    let s2 = m2 * r as f64 / (r - 1) as f64;
    Estimate {
        value: s2,
        se: Some(((m4 - m2 * m2).max(0.0) / r as f64).sqrt()),
    }
}

/// Sample covariance with standard error from the spread of centred products.
pub fn covariance_estimate(xs: &[f64], ys: &[f64]) -> Result<Estimate> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParameter(format!(
            "covariance needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let r = xs.len();
    if r < 2 {
        return Ok(Estimate {
            value: if r == 1 { 0.0 } else { f64::NAN },
            se: None,
        });
    }
    let (mx, my) = (mean(xs), mean(ys));
    let products: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let pm = mean(&products);
    let spread = central_moment(&products, pm, 2);
    Ok(Estimate {
        value: pm * r as f64 / (r - 1) as f64,
        se: Some((spread / r as f64).sqrt()),
    })
}

/// Linear-interpolated quantile (type 7) of an unsorted sample.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(xs: &[f64]) -> f64 {
    quantile(xs, 0.5)
}

/// Kolmogorov limit survival function `P(K > λ)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample KS test of `samples` against Normal(0, variance).
///
/// The p-value uses the asymptotic Kolmogorov law with Stephens' small-sample
/// scaling `(√N + 0.12 + 0.11/√N)·D`.
pub fn ks_test(samples: &[f64], variance: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("KS test needs at least one sample".into()));
    }
    if !(variance > 0.0) || !variance.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "KS reference variance must be positive, got {variance}"
        )));
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let nf = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in v.iter().enumerate() {
        let f = normal.cdf(*x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let sn = nf.sqrt();
    let p = kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d);
    Ok((d, p))
}
