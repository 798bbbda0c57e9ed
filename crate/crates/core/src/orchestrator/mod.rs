//! Closed-loop campaign conductor: wire messages, the publish/subscribe bus, campaign
//! configuration, the recommend/measure/record loop with its event log, grid sweeps and
//! replicate statistics.

mod bus;
mod compare;
mod config;
mod messages;
mod report;
mod runner;
mod service;
mod stats;
mod sweep;

use thiserror::Error;

use crate::formulation::FormulationError;
use crate::lab::LabError;
use crate::optimizer::OptimizerError;

pub use bus::{control_topic, fault_topic, recommendation_topic, result_topic, Broker, InProcessBus};
pub use compare::{
    compare_bound_widths, compare_campaign_modes, compare_weight_ratios, median_first_optimal, write_compare_csv,
    write_variant_csv, CompareOptions, CompareReport, CompareRow, OptimalCriteria, VariantSummary,
};
pub use config::{CampaignConfig, LabConfig, ReagentEntry, SweepConfig};
pub use messages::{decode_msg, encode_msg, EnvReading, FaultMsg, RecommendationMsg, ResultMsg, WireMessage};
pub use report::{campaign_report, write_report_csv, ReportRow};
pub use runner::{
    lab_rng, read_events, recommendation_rng, run_campaign, run_campaign_until, run_virtual_campaign,
    write_history_csv, CampaignEvent, LabLink, RunOptions, RunOutcome, CONFIG_FILE, EVENTS_FILE, HISTORY_FILE,
    RECORD_FILE,
};
pub use service::{BrokeredService, ExperimentService, LabWorker, ServiceError, VirtualLabService};
pub use stats::{aggregate_replicates, f_test_variances, FTest};
pub use sweep::{run_sweep, write_sweep_csv, SweepRow};

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("schema violation at `{0}`")]
    SchemaViolation(String),
    #[error("lab fault in experiment {experiment_id}: {reason}")]
    LabFault { experiment_id: u64, reason: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("at least one value is required")]
    EmptyInput,
    #[error("sample sizes must be >= 2 and SDs positive")]
    InvalidSampleSize,
    #[error("event log does not match this campaign: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
