//! Reagents, formulations, deck layout and liquid-handling arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name used for the implicit diluent in volume tables.
pub const DILUENT: &str = "water";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormulationError {
    #[error("unknown reagent `{0}`")]
    UnknownReagent(String),
    #[error("`{name}`: target concentration {target} exceeds stock {stock}")]
    ConcentrationExceedsStock { name: String, target: f64, stock: f64 },
    #[error("reagent volumes sum to {total_ul} uL, more than the {capacity_ul} uL mix volume")]
    VolumeOverflow { total_ul: f64, capacity_ul: f64 },
    #[error("`{name}`: {volume_ul} uL is below the minimum pipettable volume {min_ul} uL")]
    SubPipettableVolume { name: String, volume_ul: f64, min_ul: f64 },
    #[error("`{0}` has no price per gram")]
    MissingPrice(String),
    #[error("stage is full ({capacity} slots)")]
    StageFull { capacity: usize },
    #[error("invalid deck configuration: {0}")]
    InvalidDeck(String),
    #[error("negative concentration for `{0}`")]
    NegativeConcentration(String),
}

/// Concentration unit of a stock. Carried explicitly, never inferred from the name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConcentrationUnit {
    /// Grams per 100 mL (surfactants).
    #[serde(rename = "w/v%", alias = "%w/v", alias = "w/v")]
    WeightPerVolume,
    /// Volume percent (solvents).
    #[serde(rename = "vol%", alias = "v/v", alias = "%v/v")]
    VolumePercent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReagentStock {
    pub name: String,
    #[serde(rename = "stock")]
    pub stock_concentration: f64,
    pub unit: ConcentrationUnit,
    #[serde(rename = "price_per_g", default, skip_serializing_if = "Option::is_none")]
    pub price_per_gram: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade: Option<String>,
}

impl ReagentStock {
    pub fn new(name: impl Into<String>, stock: f64, unit: ConcentrationUnit) -> Self {
        Self { name: name.into(), stock_concentration: stock, unit, price_per_gram: None, grade: None }
    }

    pub fn with_price(mut self, price_per_gram: f64) -> Self {
        self.price_per_gram = Some(price_per_gram);
        self
    }

    pub fn with_grade(mut self, grade: impl Into<String>) -> Self {
        self.grade = Some(grade.into());
        self
    }
}

/// Reagent name to concentration, in the unit of the matching stock. Water is implicit.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Formulation(BTreeMap<String, f64>);

impl Formulation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, concentration: f64) -> Self {
        self.0.insert(name.into(), concentration);
        self
    }

    pub fn set(&mut self, name: impl Into<String>, concentration: f64) {
        self.0.insert(name.into(), concentration);
    }

    pub fn get(&self, name: &str) -> f64 {
        self.0.get(name).copied().unwrap_or(0.0)
    }

    pub fn components(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_map(&self) -> &BTreeMap<String, f64> {
        &self.0
    }
}

impl From<BTreeMap<String, f64>> for Formulation {
    fn from(m: BTreeMap<String, f64>) -> Self {
        Self(m)
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Formulation {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        Self(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

impl fmt::Display for Formulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Sum of the listed surfactants. Components outside the set (solvents) are ignored.
pub fn total_surfactant(f: &Formulation, surfactants: &BTreeSet<String>) -> f64 {
    f.components().filter(|(name, _)| surfactants.contains(*name)).map(|(_, c)| c).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLayout {
    pub levels: usize,
    pub positions: usize,
}

impl Default for StageLayout {
    fn default() -> Self {
        Self { levels: 5, positions: 9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotState {
    Free,
    Occupied,
    Spent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SlotId {
    pub level: usize,
    pub position: usize,
}

impl fmt::Display for SlotId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", level_label(self.level), self.position + 1)
    }
}

fn level_label(level: usize) -> String {
    if level < 26 {
        char::from(b'A' + level as u8).to_string()
    } else {
        format!("L{level}")
    }
}

/// Imaging positions on the multilevel stage. Single writer; allocation is first-free in
/// level-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMap {
    layout: StageLayout,
    slots: Vec<SlotState>,
}

impl StageMap {
    pub fn new(layout: StageLayout) -> Self {
        Self { layout, slots: vec![SlotState::Free; layout.levels * layout.positions] }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn free_slots(&self) -> usize {
        self.slots.iter().filter(|s| **s == SlotState::Free).count()
    }

    pub fn level_labels(&self) -> Vec<String> {
        (0..self.layout.levels).map(level_label).collect()
    }

    pub fn state(&self, slot: SlotId) -> Option<SlotState> {
        self.index(slot).map(|i| self.slots[i])
    }

    fn index(&self, slot: SlotId) -> Option<usize> {
        (slot.level < self.layout.levels && slot.position < self.layout.positions)
            .then(|| slot.level * self.layout.positions + slot.position)
    }

    pub fn allocate(&mut self) -> Result<SlotId, FormulationError> {
        let i = self
            .slots
            .iter()
            .position(|s| *s == SlotState::Free)
            .ok_or(FormulationError::StageFull { capacity: self.capacity() })?;
        self.slots[i] = SlotState::Occupied;
        Ok(SlotId { level: i / self.layout.positions, position: i % self.layout.positions })
    }

    /// Marks an imaged droplet position as used up; it is not handed out again until reset.
    pub fn mark_spent(&mut self, slot: SlotId) {
        if let Some(i) = self.index(slot) {
            self.slots[i] = SlotState::Spent;
        }
    }

    pub fn reset(&mut self) {
        self.slots.fill(SlotState::Free);
    }
}

fn default_total_mix() -> f64 {
    1000.0
}
fn default_droplet() -> f64 {
    3.0
}
fn default_replicates() -> usize {
    3
}
fn default_min_pipettable() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeckConfig {
    pub reagents: Vec<ReagentStock>,
    #[serde(default)]
    pub stage: StageLayout,
    #[serde(default = "default_total_mix", rename = "total_mix_volume_ul")]
    pub total_mix_volume: f64,
    #[serde(default = "default_droplet", rename = "droplet_volume_ul")]
    pub droplet_volume: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_min_pipettable", rename = "min_pipettable_ul")]
    pub min_pipettable: f64,
    /// Named labware slots (mixing wells, tip racks) on the deck.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labware_layout: BTreeMap<String, String>,
}

impl DeckConfig {
    pub fn new(reagents: Vec<ReagentStock>) -> Self {
        Self {
            reagents,
            stage: StageLayout::default(),
            total_mix_volume: default_total_mix(),
            droplet_volume: default_droplet(),
            replicates: default_replicates(),
            min_pipettable: default_min_pipettable(),
            labware_layout: BTreeMap::new(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self, FormulationError> {
        let deck: Self = serde_json::from_str(s).map_err(|e| FormulationError::InvalidDeck(e.to_string()))?;
        deck.validate()?;
        Ok(deck)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, FormulationError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| FormulationError::InvalidDeck(e.to_string()))?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<(), FormulationError> {
        let mut seen = BTreeSet::new();
        for r in &self.reagents {
            if !seen.insert(r.name.as_str()) {
                return Err(FormulationError::InvalidDeck(format!("duplicate reagent `{}`", r.name)));
            }
            if !(r.stock_concentration > 0.0 && r.stock_concentration <= 100.0) {
                return Err(FormulationError::InvalidDeck(format!(
                    "`{}`: stock concentration {} outside (0, 100]",
                    r.name, r.stock_concentration
                )));
            }
        }
        if self.replicates < 1 {
            return Err(FormulationError::InvalidDeck("replicates must be >= 1".into()));
        }
        if !(self.total_mix_volume > 0.0) {
            return Err(FormulationError::InvalidDeck("total mix volume must be positive".into()));
        }
        if self.droplet_volume > self.total_mix_volume / self.replicates as f64 {
            return Err(FormulationError::InvalidDeck("droplet volume exceeds mix volume per replicate".into()));
        }
        if self.stage.levels == 0 || self.stage.positions == 0 {
            return Err(FormulationError::InvalidDeck("stage has no slots".into()));
        }
        Ok(())
    }

    pub fn reagent(&self, name: &str) -> Option<&ReagentStock> {
        self.reagents.iter().find(|r| r.name == name)
    }

    pub fn stage_map(&self) -> StageMap {
        StageMap::new(self.stage)
    }
}

/// Per-reagent aspiration volumes for one mix, plus the water top-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkingVolumes {
    pub reagents: BTreeMap<String, f64>,
    pub diluent: f64,
}

impl WorkingVolumes {
    pub fn total(&self) -> f64 {
        self.reagents.values().sum::<f64>() + self.diluent
    }

    /// One fresh tip per liquid actually transferred (reagents and water).
    pub fn tips_required(&self) -> usize {
        self.reagents.values().filter(|v| **v > 0.0).count() + usize::from(self.diluent > 0.0)
    }
}

pub fn compute_working_volumes(f: &Formulation, deck: &DeckConfig) -> Result<WorkingVolumes, FormulationError> {
    compute_working_volumes_for(f, deck, deck.total_mix_volume)
}

/// Same as [`compute_working_volumes`] with an explicit mix volume.
pub fn compute_working_volumes_for(
    f: &Formulation,
    deck: &DeckConfig,
    total_mix_volume: f64,
) -> Result<WorkingVolumes, FormulationError> {
    let mut reagents = BTreeMap::new();
    for (name, c) in f.components() {
        let stock = deck.reagent(name).ok_or_else(|| FormulationError::UnknownReagent(name.to_string()))?;
        if c < 0.0 {
            return Err(FormulationError::NegativeConcentration(name.to_string()));
        }
        if c > stock.stock_concentration {
            return Err(FormulationError::ConcentrationExceedsStock {
                name: name.to_string(),
                target: c,
                stock: stock.stock_concentration,
            });
        }
        reagents.insert(name.to_string(), c / stock.stock_concentration * total_mix_volume);
    }
    let used: f64 = reagents.values().sum();
    // Tolerate round-off when a single reagent is drawn at stock strength.
    if used > total_mix_volume * (1.0 + 1e-12) {
        return Err(FormulationError::VolumeOverflow { total_ul: used, capacity_ul: total_mix_volume });
    }
    let diluent = (total_mix_volume - used).max(0.0);
    let min = deck.min_pipettable;
    for (name, v) in reagents.iter().map(|(k, v)| (k.as_str(), *v)).chain([(DILUENT, diluent)]) {
        if v > 0.0 && v < min {
            return Err(FormulationError::SubPipettableVolume { name: name.to_string(), volume_ul: v, min_ul: min });
        }
    }
    Ok(WorkingVolumes { reagents, diluent })
}

/// Reagent cost of `batch_volume_l` litres. w/v% is read as grams per 100 mL.
pub fn formulation_cost(f: &Formulation, deck: &DeckConfig, batch_volume_l: f64) -> Result<f64, FormulationError> {
    let batch_ml = batch_volume_l * 1000.0;
    let mut cost = 0.0;
    for (name, c) in f.components() {
        let stock = deck.reagent(name).ok_or_else(|| FormulationError::UnknownReagent(name.to_string()))?;
        let price = stock.price_per_gram.ok_or_else(|| FormulationError::MissingPrice(name.to_string()))?;
        cost += c / 100.0 * batch_ml * price;
    }
    Ok(cost)
}
