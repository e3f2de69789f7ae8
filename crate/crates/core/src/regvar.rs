//! Regularly varying sequences `x(k) = c · k^ρ · l(k)` and finite-n checks of
//! the moment growth conditions C1–C5.
//!
//! The conditions are asymptotic `o(·)` statements. At finite n each one is
//! reduced to a monitored ratio evaluated on a probe grid of n, and the verdict
//! is a trend test: the ratio must decrease over the last three probes and end
//! below a threshold.

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::immigration::ImmigrationModel;
use crate::moments::{ImmigrationMoments, OffspringMoments};
use crate::simulator::OffspringLaw;

/// Default probe grid for the condition checks.
pub const DEFAULT_PROBES: [usize; 4] = [100, 1_000, 10_000, 100_000];

/// Default threshold on the monitored ratio at the largest probe.
pub const DEFAULT_THRESHOLD: f64 = 0.1;

/// Monitored ratios below this are treated as exactly zero.
pub const NEGLIGIBLE_RATIO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SlowlyVarying {
    Constant,
    /// `(ln(k + 1))^power`
    LogPower { power: f64 },
    /// `l(k) = values[k - 1]`, held at the last entry beyond the table.
    Tabulated { values: Vec<f64> },
}

impl SlowlyVarying {
    pub fn eval(&self, k: usize) -> f64 {
        match self {
            SlowlyVarying::Constant => 1.0,
            SlowlyVarying::LogPower { power } => ((k as f64) + 1.0).ln().powf(*power),
            SlowlyVarying::Tabulated { values } => {
                if values.is_empty() {
                    return 1.0;
                }
                let i = k.saturating_sub(1).min(values.len() - 1);
                values[i]
            }
        }
    }

    fn is_nondecreasing(&self) -> bool {
        match self {
            SlowlyVarying::Constant => true,
            SlowlyVarying::LogPower { power } => *power >= 0.0,
            SlowlyVarying::Tabulated { values } => values.windows(2).all(|w| w[1] >= w[0]),
        }
    }
}

/// `x(k) = scale · k^index · l(k)` for `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegVarSeq {
    pub index: f64,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "constant_sv")]
    pub slowly_varying: SlowlyVarying,
}

fn one() -> f64 {
    1.0
}

fn constant_sv() -> SlowlyVarying {
    SlowlyVarying::Constant
}

impl RegVarSeq {
    pub fn new(index: f64, scale: f64, slowly_varying: SlowlyVarying) -> Result<Self> {
        if !(index >= 0.0) || !index.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regular variation index must be a finite nonnegative number, got {index}"
            )));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "regularly varying sequence needs a positive scale, got {scale}"
            )));
        }
        if let SlowlyVarying::Tabulated { values } = &slowly_varying {
            if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::InvalidParameter(
                    "tabulated slowly varying factor must be nonempty and positive".into(),
                ));
            }
        }
        Ok(Self {
            index,
            scale,
            slowly_varying,
        })
    }

    pub fn power(index: f64) -> Self {
        Self {
            index,
            scale: 1.0,
            slowly_varying: SlowlyVarying::Constant,
        }
    }

    pub fn log_power(index: f64, power: f64) -> Self {
        Self {
            index,
            scale: 1.0,
            slowly_varying: SlowlyVarying::LogPower { power },
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn eval(&self, k: usize) -> f64 {
        eval_seq(self, k)
    }

    pub fn is_monotone(&self) -> bool {
        self.index > 0.0 && self.slowly_varying.is_nondecreasing()
    }
}

pub fn eval_seq(seq: &RegVarSeq, k: usize) -> f64 {
    let k = k.max(1);
    let power = if seq.index == 0.0 {
        1.0
    } else {
        (k as f64).powf(seq.index)
    };
    seq.scale * power * seq.slowly_varying.eval(k)
}

/// `max_{1 ≤ k ≤ ⌊ns⌋} |model(k) − target(k)| / target(n)`.
///
/// `model` maps `k` to the row-`n` moment (`α(n,k)` or `β(n,k)`).
pub fn check_c1<F>(model: F, target: &RegVarSeq, n: usize, s: f64) -> Result<f64>
where
    F: Fn(usize) -> f64,
{
    let norm = target.eval(n);
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateNormalizer(format!(
            "target sequence evaluates to {norm} at n = {n}"
        )));
    }
    let upper = floor_product(n, s);
    let worst = (1..=upper)
        .map(|k| (model(k) - target.eval(k)).abs())
        .fold(0.0, f64::max);
    Ok(worst / norm)
}

/// `⌊n·s⌋` with a guard against `0.29 * 2000 = 579.999…`.
pub fn floor_product(n: usize, s: f64) -> usize {
    let x = n as f64 * s;
    let r = x.round();
    if (x - r).abs() <= 1e-9 * x.abs().max(1.0) {
        r.max(0.0) as usize
    } else {
        x.floor().max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::C1 => "C1",
            Condition::C2 => "C2",
            Condition::C3 => "C3",
            Condition::C4 => "C4",
            Condition::C5 => "C5",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrendVerdict {
    SatisfiedTrend,
    Violated,
    Inconclusive,
}

impl TrendVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            TrendVerdict::SatisfiedTrend => "satisfied-trend",
            TrendVerdict::Violated => "violated",
            TrendVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEntry {
    pub condition: Condition,
    pub probe_ns: Vec<usize>,
    pub ratios: Vec<f64>,
    pub verdict: TrendVerdict,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub threshold: f64,
    pub entries: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn entry(&self, c: Condition) -> &ConditionEntry {
        self.entries
            .iter()
            .find(|e| e.condition == c)
            .expect("every condition is reported")
    }

    pub fn verdict(&self, c: Condition) -> TrendVerdict {
        self.entry(c).verdict
    }

    /// Returns the first listed condition that is not `SatisfiedTrend`.
    pub fn first_unmet(&self, required: &[Condition]) -> Option<&ConditionEntry> {
        required
            .iter()
            .map(|c| self.entry(*c))
            .find(|e| e.verdict != TrendVerdict::SatisfiedTrend)
    }
}

/// Trend verdict for a monitored ratio sequence.
///
/// "Decreasing" means each step strictly decreases, except that a ratio that
/// is already zero may stay at zero. Ratios below [`NEGLIGIBLE_RATIO`] count
/// as zero, so floating-point residue of an exact identity does not read as a
/// trend.
pub fn trend_verdict(ratios: &[f64], threshold: f64) -> TrendVerdict {
    if ratios.iter().any(|r| !r.is_finite()) {
        return TrendVerdict::Violated;
    }
    let cleaned: Vec<f64> = ratios
        .iter()
        .map(|r| if r.abs() < NEGLIGIBLE_RATIO { 0.0 } else { *r })
        .collect();
    let tail = &cleaned[cleaned.len().saturating_sub(3)..];
    let last = *tail.last().unwrap_or(&f64::NAN);
    let decreasing = tail
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0));
    let nondecreasing = tail.windows(2).all(|w| w[1] >= w[0]);
    if decreasing && last < threshold {
        TrendVerdict::SatisfiedTrend
    } else if nondecreasing && last >= threshold {
        TrendVerdict::Violated
    } else {
        TrendVerdict::Inconclusive
    }
}

fn entry(condition: Condition, probes: &[usize], ratios: Vec<f64>, threshold: f64, note: &str) -> ConditionEntry {
    let verdict = trend_verdict(&ratios, threshold);
    ConditionEntry {
        condition,
        probe_ns: probes.to_vec(),
        ratios,
        verdict,
        note: note.to_string(),
    }
}

/// Runs the C1–C5 trend checks for an offspring law and immigration model.
pub fn check_conditions_for(
    law: &OffspringLaw,
    model: &ImmigrationModel,
    probe_ns: &[usize],
    threshold: f64,
) -> Result<ConditionReport> {
    if probe_ns.len() < 3 {
        return Err(Error::InvalidParameter(
            "condition checks need at least three probe values of n".into(),
        ));
    }
    if probe_ns.windows(2).any(|w| w[1] <= w[0]) || probe_ns[0] == 0 {
        return Err(Error::InvalidParameter(
            "probe values of n must be positive and strictly increasing".into(),
        ));
    }
    let alpha = model.alpha_target();
    let beta = model.beta_target();

    let mut c1 = Vec::with_capacity(probe_ns.len());
    for &n in probe_ns {
        let ra = check_c1(|k| model.mean(n, k), &alpha, n, 1.0)?;
        let rb = check_c1(|k| model.variance(n, k), &beta, n, 1.0)?;
        c1.push(ra.max(rb));
    }

    let c2: Vec<f64> = match law.drift() {
        Some(a) => probe_ns
            .iter()
            .map(|&n| (n as f64 * (law.mean(n) - 1.0) - a).abs())
            .collect(),
        None => probe_ns
            .iter()
            .map(|&n| (n as f64 * (law.mean(n) - 1.0)).abs())
            .collect(),
    };
    let c2_note = match law.drift() {
        Some(a) => format!("|n(a_n - 1) - a| with a = {a}"),
        None => "offspring family has no near-critical drift; monitoring |n(a_n - 1)|".to_string(),
    };

    let c3: Vec<f64> = probe_ns
        .iter()
        .map(|&n| law.variance(n) / alpha.eval(n))
        .collect();

    let alpha_grows = probe_ns
        .windows(2)
        .all(|w| alpha.eval(w[1]) > alpha.eval(w[0]));
    let c4_ratios: Vec<f64> = probe_ns
        .iter()
        .map(|&n| beta.eval(n) / (n as f64 * alpha.eval(n).powi(2)))
        .collect();
    let mut c4 = entry(
        Condition::C4,
        probe_ns,
        c4_ratios,
        threshold,
        "beta(n) / (n alpha(n)^2); alpha(n) must grow",
    );
    if !alpha_grows {
        c4.verdict = TrendVerdict::Violated;
        c4.note = "alpha(n) does not grow along the probe grid".into();
    }

    let c5 = match model.dependence_range() {
        Some(m) => {
            let m_eff = m.max(1) as f64;
            let ratios: Vec<f64> = probe_ns
                .iter()
                .map(|&n| {
                    let b = law.variance(n);
                    m_eff * beta.eval(n) / (n as f64 * alpha.eval(n) * b)
                })
                .collect();
            let min_b = probe_ns
                .iter()
                .map(|&n| law.variance(n))
                .fold(f64::INFINITY, f64::min);
            let mut e = entry(
                Condition::C5,
                probe_ns,
                ratios,
                threshold,
                &format!("m beta(n) / (n alpha(n) b_n) with m = {m}; min b_n = {min_b}"),
            );
            if !(min_b > 0.0) || !alpha_grows {
                e.verdict = TrendVerdict::Violated;
            }
            e
        }
        None => ConditionEntry {
            condition: Condition::C5,
            probe_ns: probe_ns.to_vec(),
            ratios: vec![f64::NAN; probe_ns.len()],
            verdict: TrendVerdict::Inconclusive,
            note: "immigration is not m-dependent".into(),
        },
    };

    Ok(ConditionReport {
        threshold,
        entries: vec![
            entry(Condition::C1, probe_ns, c1, threshold, "max_k |alpha(n,k) - alpha(k)| / alpha(n), same for beta"),
            entry(Condition::C2, probe_ns, c2, threshold, &c2_note),
            entry(Condition::C3, probe_ns, c3, threshold, "b_n / alpha(n)"),
            c4,
            c5,
        ],
    })
}

pub fn check_conditions(config: &ExperimentConfig, probe_ns: &[usize]) -> Result<ConditionReport> {
    let law = config.offspring_law()?;
    let model = config.immigration_model()?;
    check_conditions_for(&law, &model, probe_ns, config.thresholds.condition)
}
