use std::path::Path;

use super::{ExperimentService, OrchestratorError, RecommendationMsg, ServiceError, SweepConfig, VirtualLabService};
use crate::formulation::Formulation;
use crate::optimizer::build_search_space;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub formulation: Formulation,
    pub angles_deg: Vec<f64>,
    pub mean_deg: f64,
    pub sd_deg: f64,
}

/// Measures every grid point in grid order on a fresh virtual lab, replacing the substrate
/// whenever the stage fills up.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, OrchestratorError> {
    config.validate()?;
    let grid = build_search_space(config.space.clone()).map_err(|e| OrchestratorError::ConfigInvalid(e.to_string()))?;
    let mut service = VirtualLabService::new(config.lab.virtual_lab()?, config.deck(), config.lab.timing, config.seed);
    let mut rows = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let formulation = grid.formulation(i);
        let rec = RecommendationMsg {
            campaign_id: config.id.clone(),
            experiment_id: i as u64 + 1,
            formulation: formulation.as_map().clone(),
            replicates: config.replicates,
        };
        let res = match service.execute(&rec) {
            Err(ServiceError::StageFull) => {
                service.replace_substrate();
                service.execute(&rec)
            }
            r => r,
        };
        let res = res.map_err(|e| OrchestratorError::LabFault {
            experiment_id: rec.experiment_id,
            reason: match e {
                ServiceError::StageFull => "stage full after substrate change".into(),
                ServiceError::Fault(r) => r,
            },
        })?;
        rows.push(SweepRow { formulation, mean_deg: res.mean_deg, sd_deg: res.sd_deg, angles_deg: res.angles_deg });
    }
    Ok(rows)
}

/// One row per grid point: parameter columns, then `mean_deg, sd_deg, n`.
pub fn write_sweep_csv(path: &Path, config: &SweepConfig, rows: &[SweepRow]) -> Result<(), OrchestratorError> {
    let mut w = csv::Writer::from_path(path)?;
    let names: Vec<&str> = config.space.iter().map(|p| p.name.as_str()).collect();
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.extend(["mean_deg", "sd_deg", "n"].map(String::from));
    w.write_record(&header)?;
    for r in rows {
        let mut row: Vec<String> = names.iter().map(|n| format!("{}", r.formulation.get(n))).collect();
        row.extend([format!("{}", r.mean_deg), format!("{}", r.sd_deg), r.angles_deg.len().to_string()]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
