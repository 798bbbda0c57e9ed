use std::path::Path;

use super::{CampaignConfig, OptimalCriteria, OrchestratorError};
use crate::formulation::formulation_cost;
use crate::optimizer::CampaignRecord;

/// Per-iteration campaign summary.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub iteration: usize,
    pub values: Vec<f64>,
    pub mean_deg: f64,
    pub desirability: f64,
    pub best_desirability: f64,
    /// `None` without a contact-angle match target to judge against.
    pub optimal: Option<bool>,
    /// Reagent cost of one litre, when every reagent has a price.
    pub cost_per_l: Option<f64>,
}

pub fn campaign_report(record: &CampaignRecord, config: Option<&CampaignConfig>) -> Vec<ReportRow> {
    let criteria = config.and_then(|c| OptimalCriteria::from_config(c).ok());
    let deck = config.map(CampaignConfig::deck);
    let mut best = f64::NEG_INFINITY;
    record
        .history
        .iter()
        .map(|h| {
            best = best.max(h.desirability);
            let mean = h.mean_angle();
            ReportRow {
                iteration: h.iteration,
                values: record.space.parameters().iter().map(|p| h.formulation.get(&p.name)).collect(),
                mean_deg: mean,
                desirability: h.desirability,
                best_desirability: best,
                optimal: criteria
                    .map(|c| h.desirability >= c.min_desirability && (mean - c.target_deg).abs() <= c.tolerance_deg),
                cost_per_l: deck.as_ref().and_then(|d| formulation_cost(&h.formulation, d, 1.0).ok()),
            }
        })
        .collect()
}

pub fn write_report_csv(path: &Path, record: &CampaignRecord, rows: &[ReportRow]) -> Result<(), OrchestratorError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(record.space.parameters().iter().map(|p| p.name.clone()));
    header.extend(["mean_deg", "desirability", "best_desirability", "optimal", "cost_per_l"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut row = vec![r.iteration.to_string()];
        row.extend(r.values.iter().map(|v| format!("{v}")));
        row.extend([format!("{}", r.mean_deg), format!("{}", r.desirability), format!("{}", r.best_desirability)]);
        row.push(r.optimal.map(|o| u8::from(o).to_string()).unwrap_or_default());
        row.push(r.cost_per_l.map(|c| format!("{c}")).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
