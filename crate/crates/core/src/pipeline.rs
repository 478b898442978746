//! Train the selected methods on a split and evaluate them.

use serde::{Deserialize, Serialize};

use crate::classifier::{train_with_objective, Objective, TrainConfig, TrainState};
use crate::data::{DatasetSplit, PoiSet};
use crate::error::{Error, Result};
use crate::eval::{evaluate, BaselineMethod, EvalReport, JointMethod, DEFAULT_KS};
use crate::geo::{estimate_prior, DistanceBucketing, ProximityPrior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSelection {
    Joint,
    Baseline,
    Both,
}

impl MethodSelection {
    pub fn joint(self) -> bool {
        matches!(self, MethodSelection::Joint | MethodSelection::Both)
    }

    pub fn baseline(self) -> bool {
        matches!(self, MethodSelection::Baseline | MethodSelection::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorConfig {
    pub bucket_width_km: f64,
    pub max_distance_km: f64,
    pub smoothing_alpha: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            bucket_width_km: 0.5,
            max_distance_km: 30.0,
            smoothing_alpha: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn bucketing(&self) -> Result<DistanceBucketing> {
        DistanceBucketing::new(self.bucket_width_km, self.max_distance_km)
    }

    pub fn validate(&self) -> Result<()> {
        self.bucketing()?;
        if !(self.smoothing_alpha >= 0.0 && self.smoothing_alpha.is_finite()) {
            return Err(Error::config("smoothing alpha must be non-negative"));
        }
        Ok(())
    }
}

/// What to train and how to score it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub prior: PriorConfig,
    pub train: TrainConfig,
    pub methods: MethodSelection,
    pub ks: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            prior: PriorConfig::default(),
            train: TrainConfig::default(),
            methods: MethodSelection::Both,
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.train.validate()?;
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::config("k values must be positive"));
        }
        Ok(())
    }
}

/// Seeds for each method, derived from one run seed.
pub fn method_seed(seed: u64, objective: Objective) -> u64 {
    match objective {
        Objective::Category => seed,
        Objective::Poi => seed ^ 0x9e37_79b9_7f4a_7c15,
    }
}

#[derive(Debug, Clone)]
pub struct TrainedMethods {
    pub prior: ProximityPrior,
    pub joint: Option<TrainState>,
    pub baseline: Option<TrainState>,
}

impl TrainedMethods {
    /// Estimates the prior and trains every selected method on `split`.
    pub fn train(split: &DatasetSplit, pois: &PoiSet, config: &ExperimentConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let prior = estimate_prior(&split.train, pois, config.prior.bucketing()?, config.prior.smoothing_alpha)?;
        let run = |objective| train_with_objective(split, pois, &config.train, objective, method_seed(seed, objective));
        let joint = config.methods.joint().then(|| run(Objective::Category)).transpose()?;
        let baseline = config.methods.baseline().then(|| run(Objective::Poi)).transpose()?;
        Ok(TrainedMethods { prior, joint, baseline })
    }

    /// Reports in the order joint, baseline.
    pub fn evaluate(&self, split: &DatasetSplit, pois: &PoiSet, candidates: &PoiSet, ks: &[usize]) -> Result<Vec<EvalReport>> {
        let mut reports = Vec::new();
        if let Some(s) = &self.joint {
            let m = JointMethod {
                predictor: &s.predictor,
                prior: &self.prior,
                pois,
            };
            reports.push(evaluate(&m, split, candidates, ks)?);
        }
        if let Some(s) = &self.baseline {
            let m = BaselineMethod {
                predictor: &s.predictor,
                pois,
            };
            reports.push(evaluate(&m, split, candidates, ks)?);
        }
        Ok(reports)
    }
}
