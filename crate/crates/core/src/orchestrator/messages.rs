use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{aggregate_replicates, OrchestratorError};
use crate::formulation::Formulation;

/// Tolerance on the reported mean and SD against the listed angles.
const SUMMARY_TOLERANCE: f64 = 1e-9;

/// Next experiment, sent from the optimizer to the lab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationMsg {
    pub campaign_id: String,
    /// 1-based, strictly increasing within a campaign.
    pub experiment_id: u64,
    pub formulation: BTreeMap<String, f64>,
    pub replicates: usize,
}

impl RecommendationMsg {
    pub fn formulation(&self) -> Formulation {
        self.formulation.iter().map(|(k, &v)| (k.clone(), v)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvReading {
    pub temperature_c: f64,
    pub humidity_pct: f64,
}

/// Measured replicates of one experiment, sent from the lab back to the optimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMsg {
    pub campaign_id: String,
    pub experiment_id: u64,
    /// Replicate count of the answered recommendation.
    pub replicates: usize,
    pub angles_deg: Vec<f64>,
    pub mean_deg: f64,
    pub sd_deg: f64,
    pub rmse_px: Vec<f64>,
    /// Capture time of each replicate, seconds since the campaign started.
    pub timestamps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvReading>,
}

impl ResultMsg {
    /// Builds a result with mean and SD computed from `angles_deg`.
    pub fn new(
        campaign_id: impl Into<String>,
        experiment_id: u64,
        angles_deg: Vec<f64>,
        rmse_px: Vec<f64>,
        timestamps: Vec<f64>,
    ) -> Result<Self, OrchestratorError> {
        let (mean_deg, sd_deg) = aggregate_replicates(&angles_deg)?;
        Ok(Self {
            campaign_id: campaign_id.into(),
            experiment_id,
            replicates: angles_deg.len(),
            angles_deg,
            mean_deg,
            sd_deg,
            rmse_px,
            timestamps,
            env: None,
        })
    }
}

/// Failed experiment, answered instead of a result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultMsg {
    pub campaign_id: String,
    pub experiment_id: u64,
    /// The stage had too few free slots; the substrate must be replaced before a retry.
    #[serde(default)]
    pub stage_full: bool,
    pub reason: String,
}

/// A message with a JSON wire format and structural checks beyond its types.
pub trait WireMessage: Serialize + DeserializeOwned {
    const REQUIRED: &'static [&'static str];

    fn check(&self) -> Result<(), OrchestratorError>;
}

fn violation(path: &str) -> OrchestratorError {
    OrchestratorError::SchemaViolation(path.to_string())
}

fn check_id(campaign_id: &str, experiment_id: u64) -> Result<(), OrchestratorError> {
    if campaign_id.is_empty() {
        return Err(violation("campaign_id"));
    }
    if experiment_id == 0 {
        return Err(violation("experiment_id"));
    }
    Ok(())
}

impl WireMessage for RecommendationMsg {
    const REQUIRED: &'static [&'static str] = &["campaign_id", "experiment_id", "formulation", "replicates"];

    fn check(&self) -> Result<(), OrchestratorError> {
        check_id(&self.campaign_id, self.experiment_id)?;
        if let Some((name, _)) = self.formulation.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(violation(&format!("formulation.{name}")));
        }
        if self.replicates == 0 {
            return Err(violation("replicates"));
        }
        Ok(())
    }
}

impl WireMessage for ResultMsg {
    const REQUIRED: &'static [&'static str] =
        &["campaign_id", "experiment_id", "replicates", "angles_deg", "mean_deg", "sd_deg", "rmse_px", "timestamps"];

    fn check(&self) -> Result<(), OrchestratorError> {
        check_id(&self.campaign_id, self.experiment_id)?;
        if self.replicates == 0 {
            return Err(violation("replicates"));
        }
        if self.angles_deg.len() != self.replicates || self.angles_deg.iter().any(|a| !a.is_finite()) {
            return Err(violation("angles_deg"));
        }
        if self.rmse_px.len() != self.replicates {
            return Err(violation("rmse_px"));
        }
        if self.timestamps.len() != self.replicates {
            return Err(violation("timestamps"));
        }
        let (mean, sd) = aggregate_replicates(&self.angles_deg)?;
        if !((self.mean_deg - mean).abs() <= SUMMARY_TOLERANCE) {
            return Err(violation("mean_deg"));
        }
        if !((self.sd_deg - sd).abs() <= SUMMARY_TOLERANCE) {
            return Err(violation("sd_deg"));
        }
        Ok(())
    }
}

impl WireMessage for FaultMsg {
    const REQUIRED: &'static [&'static str] = &["campaign_id", "experiment_id", "reason"];

    fn check(&self) -> Result<(), OrchestratorError> {
        check_id(&self.campaign_id, self.experiment_id)
    }
}

/// Canonical UTF-8 JSON: fields in declaration order, map keys sorted, shortest
/// round-trip floats.
pub fn encode_msg<M: WireMessage>(msg: &M) -> Result<Vec<u8>, OrchestratorError> {
    msg.check()?;
    Ok(serde_json::to_vec(msg)?)
}

/// Parses and checks a message; errors name the offending field.
pub fn decode_msg<M: WireMessage>(bytes: &[u8]) -> Result<M, OrchestratorError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|_| violation("$"))?;
    let obj = value.as_object().ok_or_else(|| violation("$"))?;
    if let Some(missing) = M::REQUIRED.iter().find(|k| !obj.contains_key(**k)) {
        return Err(violation(missing));
    }
    let msg: M = serde_path_to_error::deserialize(value).map_err(|e| violation(&e.path().to_string()))?;
    msg.check()?;
    Ok(msg)
}
