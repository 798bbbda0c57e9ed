use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::target::{CONTACT_ANGLE, TOTAL_SURFACTANT};
use super::{
    desirability, gp_fit, normalize_target, thompson_recommend, HyperPolicy, OptimizerError, SearchSpace, TargetSpec,
};
use crate::formulation::{total_surfactant, Formulation};

/// One completed experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    /// 1-based position in the campaign.
    pub iteration: usize,
    pub candidate: usize,
    pub formulation: Formulation,
    /// Replicate contact angles.
    pub measurements: Vec<f64>,
    /// Raw value of each target, in target order.
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub desirability: f64,
}

impl HistoryEntry {
    pub fn mean_angle(&self) -> f64 {
        self.measurements.iter().sum::<f64>() / self.measurements.len() as f64
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CampaignStatus {
    #[default]
    Running,
    /// Budget spent.
    Completed,
    /// Every candidate measured.
    Exhausted,
}

/// Raw target values, normalized values and desirability of one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub desirability: f64,
}

/// Search space, objective and history of one optimization campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRecord {
    pub id: String,
    pub seed: u64,
    pub space: SearchSpace,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub surfactants: BTreeSet<String>,
    pub history: Vec<HistoryEntry>,
    #[serde(default)]
    pub pending: Option<usize>,
    #[serde(default)]
    pub status: CampaignStatus,
    #[serde(default)]
    pub hyper_policy: HyperPolicy<f64>,
}

impl CampaignRecord {
    pub fn new(
        id: impl Into<String>,
        seed: u64,
        space: SearchSpace,
        targets: Vec<TargetSpec>,
        surfactants: BTreeSet<String>,
    ) -> Result<Self, OptimizerError> {
        if targets.is_empty() {
            return Err(OptimizerError::InvalidTarget("at least one target is required".into()));
        }
        for t in &targets {
            t.validate()?;
            if t.name != CONTACT_ANGLE && t.name != TOTAL_SURFACTANT {
                return Err(OptimizerError::InvalidTarget(format!(
                    "`{}`: targets are `{CONTACT_ANGLE}` or `{TOTAL_SURFACTANT}`",
                    t.name
                )));
            }
        }
        Ok(Self {
            id: id.into(),
            seed,
            space,
            targets,
            surfactants,
            history: Vec::new(),
            pending: None,
            status: CampaignStatus::Running,
            hyper_policy: HyperPolicy::default(),
        })
    }

    pub fn weights(&self) -> Vec<f64> {
        self.targets.iter().map(|t| t.weight).collect()
    }

    /// Scores an observation of `f` whose replicate mean is `mean_angle`.
    pub fn evaluate(&self, f: &Formulation, mean_angle: f64) -> Result<Evaluation, OptimizerError> {
        let raw: Vec<f64> = self
            .targets
            .iter()
            .map(|t| if t.name == TOTAL_SURFACTANT { total_surfactant(f, &self.surfactants) } else { mean_angle })
            .collect();
        let normalized: Vec<f64> = raw.iter().zip(&self.targets).map(|(&y, t)| normalize_target(y, t)).collect();
        let desirability = desirability(&normalized, &self.weights())?;
        Ok(Evaluation { raw, normalized, desirability })
    }

    /// Picks the next formulation: uniformly at random for the first experiment, then by
    /// Thompson sampling from a GP fitted to the desirability history.
    pub fn recommend_next(&mut self, rng: &mut impl Rng) -> Result<Formulation, OptimizerError> {
        let pool = self.space.unmeasured();
        if pool.is_empty() {
            self.status = CampaignStatus::Exhausted;
            return Err(OptimizerError::SpaceExhausted);
        }
        let idx = if self.history.is_empty() {
            pool[rng.random_range(0..pool.len())]
        } else {
            let x: Vec<Vec<f64>> = self.history.iter().map(|h| self.space.unit_point(h.candidate)).collect();
            let y: Vec<f64> = self.history.iter().map(|h| h.desirability).collect();
            let gp = gp_fit(&x, &y, self.space.dim(), &self.hyper_policy)?;
            thompson_recommend(&gp, &self.space, rng)?
        };
        self.pending = Some(idx);
        Ok(self.space.formulation(idx))
    }

    /// Drops the pending recommendation after a failed experiment; the candidate stays in
    /// the pool.
    pub fn cancel_pending(&mut self) -> Option<usize> {
        self.pending.take()
    }

    /// Appends the result for the pending recommendation.
    pub fn record_result(&mut self, f: &Formulation, angles: &[f64]) -> Result<&HistoryEntry, OptimizerError> {
        let idx = self.space.index_of(f).ok_or(OptimizerError::UnknownFormulation)?;
        if self.space.is_measured(idx) {
            return Err(OptimizerError::DuplicateResult);
        }
        if self.pending != Some(idx) {
            return Err(OptimizerError::UnknownFormulation);
        }
        if angles.is_empty() || angles.iter().any(|a| !a.is_finite()) {
            return Err(OptimizerError::InvalidParameter("result needs finite replicate angles".into()));
        }
        let mean = angles.iter().sum::<f64>() / angles.len() as f64;
        let e = self.evaluate(f, mean)?;
        self.space.mark_measured(idx);
        self.pending = None;
        self.history.push(HistoryEntry {
            iteration: self.history.len() + 1,
            candidate: idx,
            formulation: self.space.formulation(idx),
            measurements: angles.to_vec(),
            raw: e.raw,
            normalized: e.normalized,
            desirability: e.desirability,
        });
        if self.space.unmeasured().is_empty() {
            self.status = CampaignStatus::Exhausted;
        }
        Ok(self.history.last().expect("just pushed"))
    }
}

pub fn recommend_next(campaign: &mut CampaignRecord, rng: &mut impl Rng) -> Result<Formulation, OptimizerError> {
    campaign.recommend_next(rng)
}

pub fn record_result<'a>(
    campaign: &'a mut CampaignRecord,
    f: &Formulation,
    angles: &[f64],
) -> Result<&'a HistoryEntry, OptimizerError> {
    campaign.record_result(f, angles)
}
