//! Discrete-grid Bayesian optimization: search spaces, target normalization and
//! desirability, a Matern 5/2 Gaussian process and Thompson sampling.

mod campaign;
mod gp;
pub mod linalg;
mod space;
mod target;
mod thompson;

use thiserror::Error;

pub use campaign::{recommend_next, record_result, CampaignRecord, CampaignStatus, Evaluation, HistoryEntry};
pub use gp::{gp_fit, GpHyper, GpState, HyperGrid, HyperPolicy};
pub use space::{build_search_space, build_search_space_limited, ParameterRange, SearchSpace, MAX_CANDIDATES};
pub use target::{
    desirability, normalize_target, TargetMode, TargetSpec, Transformation, BELL_HALF_VALUE_FRACTION, CONTACT_ANGLE,
    TOTAL_SURFACTANT,
};
pub use thompson::{sample_argmax, thompson_recommend, MAX_SAMPLE_JITTER, SAMPLE_JITTER};

pub type GpState64 = GpState<f64>;
pub type GpState32 = GpState<f32>;
pub type GpHyper64 = GpHyper<f64>;
pub type GpHyper32 = GpHyper<f32>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error("search space is empty")]
    EmptySpace,
    #[error("search space has {count} candidates, limit is {limit}")]
    SpaceTooLarge { count: f64, limit: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("{targets} values but {weights} weights")]
    LengthMismatch { targets: usize, weights: usize },
    #[error("covariance matrix is not positive definite")]
    SingularCovariance,
    #[error("every candidate has been measured")]
    SpaceExhausted,
    #[error("formulation was not recommended by this campaign")]
    UnknownFormulation,
    #[error("formulation already has a result")]
    DuplicateResult,
}
