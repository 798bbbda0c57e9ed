use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::formulation::{compute_working_volumes, ConcentrationUnit, DeckConfig, ReagentStock, StageLayout};
use crate::lab::{CameraConfig, ExperimentMode, ResponseModel, TimingModel, VirtualLab};
use crate::optimizer::{
    build_search_space, CampaignRecord, HyperPolicy, ParameterRange, SearchSpace, TargetSpec, CONTACT_ANGLE,
};

fn invalid(msg: impl std::fmt::Display) -> OrchestratorError {
    OrchestratorError::ConfigInvalid(msg.to_string())
}

fn default_replicates() -> usize {
    3
}

fn default_id() -> String {
    "campaign".into()
}

/// Stock solution on the deck.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReagentEntry {
    pub stock: f64,
    pub unit: ConcentrationUnit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price_per_g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<String>,
}

/// Virtual lab and deck settings; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabConfig {
    pub model: ResponseModel,
    pub mode: ExperimentMode,
    pub camera: CameraConfig,
    pub stage: StageLayout,
    pub timing: TimingModel,
    pub total_mix_volume_ul: Option<f64>,
    pub droplet_volume_ul: Option<f64>,
    pub min_pipettable_ul: Option<f64>,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            model: ResponseModel::calibrated(),
            mode: ExperimentMode::Numeric,
            camera: CameraConfig::default(),
            stage: StageLayout::default(),
            timing: TimingModel::default(),
            total_mix_volume_ul: None,
            droplet_volume_ul: None,
            min_pipettable_ul: None,
        }
    }
}

impl LabConfig {
    pub fn deck(&self, reagents: &BTreeMap<String, ReagentEntry>, replicates: usize) -> DeckConfig {
        let stocks = reagents
            .iter()
            .map(|(name, r)| {
                let mut s = ReagentStock::new(name.clone(), r.stock, r.unit);
                s.price_per_gram = r.price_per_g;
                s.grade = r.grade.clone();
                s
            })
            .collect();
        let mut deck = DeckConfig::new(stocks);
        deck.stage = self.stage;
        deck.replicates = replicates;
        if let Some(v) = self.total_mix_volume_ul {
            deck.total_mix_volume = v;
        }
        if let Some(v) = self.droplet_volume_ul {
            deck.droplet_volume = v;
        }
        if let Some(v) = self.min_pipettable_ul {
            deck.min_pipettable = v;
        }
        deck
    }

    pub fn virtual_lab(&self) -> Result<VirtualLab, OrchestratorError> {
        self.timing.validate()?;
        let mut lab = VirtualLab::new(self.model.clone(), self.stage, self.mode)?;
        lab.camera = self.camera;
        Ok(lab)
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, OrchestratorError> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(invalid)
}

/// Checks shared by campaigns and sweeps: grid, deck, and that every grid corner can be
/// pipetted and has a modelled response.
fn validate_grid(
    space: &[ParameterRange],
    reagents: &BTreeMap<String, ReagentEntry>,
    replicates: usize,
    lab: &LabConfig,
) -> Result<(SearchSpace, DeckConfig), OrchestratorError> {
    if space.is_empty() {
        return Err(invalid("search space has no parameters"));
    }
    let grid = build_search_space(space.to_vec()).map_err(invalid)?;
    let deck = lab.deck(reagents, replicates);
    deck.validate().map_err(invalid)?;
    if replicates > deck.stage_map().capacity() {
        return Err(invalid(format!("{replicates} replicates exceed the stage capacity")));
    }
    lab.model.validate().map_err(invalid)?;
    lab.timing.validate().map_err(invalid)?;
    for corner in [0, grid.len() - 1] {
        let f = grid.formulation(corner);
        compute_working_volumes(&f, &deck).map_err(|e| invalid(format!("grid point {corner}: {e}")))?;
        lab.model.theta(&f).map_err(invalid)?;
    }
    Ok((grid, deck))
}

/// Campaign definition: reagents and stocks, replicate count, per-reagent grid ranges and
/// targets, mirroring the campaign set-up form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub reagents: BTreeMap<String, ReagentEntry>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub space: Vec<ParameterRange>,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub surfactants: Vec<String>,
    #[serde(default)]
    pub seed: u64,
    /// Maximum accepted experiments; the whole grid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default)]
    pub lab: LabConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hyper: Option<HyperPolicy<f64>>,
}

impl CampaignConfig {
    pub fn from_json_str(s: &str) -> Result<Self, OrchestratorError> {
        let c: Self = serde_json::from_str(s).map_err(invalid)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let c: Self = read_json(path.as_ref())?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.id.is_empty() || self.id.contains(['/', '+', '#']) {
            return Err(invalid("campaign id must be non-empty and free of '/', '+', '#'"));
        }
        validate_grid(&self.space, &self.reagents, self.replicates, &self.lab)?;
        if let Some(s) = self.surfactants.iter().find(|s| !self.reagents.contains_key(*s)) {
            return Err(invalid(format!("surfactant `{s}` is not a reagent")));
        }
        if self.budget == Some(0) {
            return Err(invalid("budget must be at least 1"));
        }
        self.record(self.seed).map(|_| ())
    }

    pub fn search_space(&self) -> Result<SearchSpace, OrchestratorError> {
        build_search_space(self.space.clone()).map_err(invalid)
    }

    pub fn deck(&self) -> DeckConfig {
        self.lab.deck(&self.reagents, self.replicates)
    }

    pub fn surfactant_set(&self) -> BTreeSet<String> {
        self.surfactants.iter().cloned().collect()
    }

    /// Fresh campaign state for `seed`.
    pub fn record(&self, seed: u64) -> Result<CampaignRecord, OrchestratorError> {
        let mut r = CampaignRecord::new(
            self.id.clone(),
            seed,
            self.search_space()?,
            self.targets.clone(),
            self.surfactant_set(),
        )
        .map_err(invalid)?;
        if let Some(h) = &self.hyper {
            r.hyper_policy = h.clone();
        }
        Ok(r)
    }

    /// The same campaign optimizing the contact angle alone.
    pub fn single_objective(&self) -> Result<Self, OrchestratorError> {
        let targets: Vec<TargetSpec> = self.targets.iter().filter(|t| t.name == CONTACT_ANGLE).cloned().collect();
        if targets.is_empty() {
            return Err(invalid("no contact-angle target to reduce to"));
        }
        Ok(Self { targets, ..self.clone() })
    }

    pub fn budget_or_grid(&self) -> Result<usize, OrchestratorError> {
        let n = self.search_space()?.len();
        Ok(self.budget.map_or(n, |b| b.min(n)))
    }
}

/// Exhaustive screening of a grid without optimization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub reagents: BTreeMap<String, ReagentEntry>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    pub space: Vec<ParameterRange>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub lab: LabConfig,
}

impl SweepConfig {
    pub fn from_json_str(s: &str) -> Result<Self, OrchestratorError> {
        let c: Self = serde_json::from_str(s).map_err(invalid)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, OrchestratorError> {
        let c: Self = read_json(path.as_ref())?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        validate_grid(&self.space, &self.reagents, self.replicates, &self.lab).map(|_| ())
    }

    pub fn deck(&self) -> DeckConfig {
        self.lab.deck(&self.reagents, self.replicates)
    }
}
