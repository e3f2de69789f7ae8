//! Experiment description shared by the library checks and the runner.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::immigration::{BlockSum, ImmigrationModel, Innovation, Marginal, MarkovModulated, MeanProfile, Perturbation, DEFAULT_PSI_CAP};
use crate::limits::DriftParam;
use crate::regvar::{RegVarSeq, DEFAULT_PROBES};
use crate::simulator::OffspringLaw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Theorem1,
    Theorem2,
    Lemma1,
    Lemmas456,
    Conditions,
    Curves,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Theorem1 => "theorem1",
            ExperimentKind::Theorem2 => "theorem2",
            ExperimentKind::Lemma1 => "lemma1",
            ExperimentKind::Lemmas456 => "lemmas456",
            ExperimentKind::Conditions => "conditions",
            ExperimentKind::Curves => "curves",
        }
    }
}

/// Immigration model as written in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ImmigrationSpec {
    IndependentPoisson {
        profile: MeanProfile,
    },
    TwoPoint {
        #[serde(default)]
        perturbation: Perturbation,
    },
    BlockSum {
        m: usize,
        #[serde(default = "poisson_innovation")]
        innovation: Innovation,
        profile: MeanProfile,
        #[serde(default = "default_psi_cap")]
        psi_cap: f64,
    },
    MarkovModulated {
        transition: Vec<Vec<f64>>,
        levels: Vec<f64>,
        profile: MeanProfile,
    },
}

fn poisson_innovation() -> Innovation {
    Innovation::Poisson
}

fn default_psi_cap() -> f64 {
    DEFAULT_PSI_CAP
}

impl ImmigrationSpec {
    pub fn build(&self) -> Result<ImmigrationModel> {
        let check_profile = |p: &MeanProfile| {
            RegVarSeq::new(p.target.index, p.target.scale, p.target.slowly_varying.clone()).map(|_| ())
        };
        Ok(match self {
            ImmigrationSpec::IndependentPoisson { profile } => {
                check_profile(profile)?;
                ImmigrationModel::Independent(Marginal::Poisson {
                    profile: profile.clone(),
                })
            }
            ImmigrationSpec::TwoPoint { perturbation } => ImmigrationModel::two_point(*perturbation),
            ImmigrationSpec::BlockSum {
                m,
                innovation,
                profile,
                psi_cap,
            } => {
                check_profile(profile)?;
                if !(*psi_cap > 0.0) {
                    return Err(Error::InvalidParameter("psi_cap must be positive".into()));
                }
                ImmigrationModel::MDependentBlockSum(BlockSum {
                    m: *m,
                    innovation: *innovation,
                    profile: profile.clone(),
                    psi_cap: *psi_cap,
                })
            }
            ImmigrationSpec::MarkovModulated {
                transition,
                levels,
                profile,
            } => {
                check_profile(profile)?;
                ImmigrationModel::MarkovModulated(MarkovModulated::new(
                    transition.clone(),
                    levels.clone(),
                    profile.clone(),
                )?)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// final median grid sup-distance
    pub sup_distance: f64,
    /// final `E sup |Z2|²`
    pub l2: f64,
    /// minimum KS p-value
    pub ks_p: f64,
    /// Monte Carlo tolerance in standard errors
    pub se_multiple: f64,
    /// final ratio of the condition trend checks
    pub condition: f64,
    /// absolute deviation allowed between deterministic scaled sums and their limits
    pub lemma_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            sup_distance: 0.1,
            l2: 0.05,
            ks_p: 0.01,
            se_multiple: 4.0,
            condition: crate::regvar::DEFAULT_THRESHOLD,
            lemma_tolerance: 1e-2,
        }
    }
}

fn default_replicates() -> usize {
    200
}

fn default_horizon() -> f64 {
    1.0
}

fn default_grid_points() -> usize {
    100
}

fn default_time_points() -> Vec<f64> {
    vec![0.25, 0.5, 0.75, 1.0]
}

fn default_output() -> String {
    "runs".into()
}

fn default_probes() -> Vec<usize> {
    DEFAULT_PROBES.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub offspring: OffspringLaw,
    pub immigration: ImmigrationSpec,
    /// Optional cross-checks of the derived drift and exponents.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    pub n_list: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_time_points")]
    pub time_points: Vec<f64>,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Shift parameter of the weighted sums in the `lemmas456` experiment.
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_probes")]
    pub probe_ns: Vec<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default = "default_output")]
    pub output: String,
}

impl ExperimentConfig {
    pub fn offspring_law(&self) -> Result<OffspringLaw> {
        self.offspring.validate()?;
        Ok(self.offspring.clone())
    }

    pub fn immigration_model(&self) -> Result<ImmigrationModel> {
        self.immigration.build()
    }

    /// Drift and exponents derived from the offspring law and immigration targets.
    pub fn drift_param(&self) -> Result<DriftParam> {
        let law = self.offspring_law()?;
        let model = self.immigration_model()?;
        let a = law.drift().ok_or_else(|| {
            Error::InvalidParameter("offspring law has no near-critical drift; set a Bernoulli, Poisson or three-point family".into())
        })?;
        DriftParam::new(a, model.alpha_target().index, model.beta_target().index)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::InvalidParameter("n_list must not be empty".into()));
        }
        if self.n_list[0] < 2 {
            return Err(Error::InvalidParameter("n_list entries must be at least 2".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter(format!(
                "n_list must be strictly increasing, got {:?}",
                self.n_list
            )));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidParameter("horizon must be positive and finite".into()));
        }
        if self.grid_points == 0 {
            return Err(Error::InvalidParameter("grid_points must be at least 1".into()));
        }
        if self
            .time_points
            .iter()
            .any(|t| !(*t > 0.0) || *t > self.horizon)
        {
            return Err(Error::InvalidParameter(format!(
                "time_points must lie in (0, horizon = {}]",
                self.horizon
            )));
        }
        if self.time_points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("time_points must be strictly increasing".into()));
        }
        let t = &self.thresholds;
        if [t.sup_distance, t.l2, t.ks_p, t.se_multiple, t.condition, t.lemma_tolerance]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return Err(Error::InvalidParameter("thresholds must be positive".into()));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        let p = self.drift_param()?;
        let cross = [("a", self.a, p.a), ("alpha", self.alpha, p.alpha), ("beta", self.beta, p.beta)];
        for (name, given, derived) in cross {
            if let Some(v) = given {
                if (v - derived).abs() > 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "{name} = {v} does not match the value {derived} implied by the offspring and immigration settings"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The largest row of the ladder.
    pub fn n_max(&self) -> usize {
        *self.n_list.last().expect("validated n_list is nonempty")
    }
}
