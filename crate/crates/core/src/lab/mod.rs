//! Simulated laboratory: formulation response models, a synthetic drop camera, replicate
//! experiments and a robot timing model.

mod experiment;
mod render;
mod response;
mod timing;

use thiserror::Error;

use crate::formulation::FormulationError;
use crate::geometry::GeometryError;
use crate::imaging::ImagingError;

pub use experiment::{run_virtual_experiment, CameraConfig, ExperimentMode, ReplicateMeasurement, VirtualLab};
pub use render::{render_droplet, RenderParams};
pub use response::{calibrate_solvent, response_theta, ComponentResponse, ResponseModel, THETA_MAX_DEG, THETA_MIN_DEG};
pub use timing::{simulate_throughput, TimingModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("no response model covers component `{0}`")]
    UnknownComponent(String),
    #[error("contact angle {0} deg cannot be rendered")]
    InvalidAngle(f64),
    #[error("invalid render parameters: {0}")]
    InvalidRender(String),
    #[error("drop does not fit inside the image")]
    DropletOutOfFrame,
    #[error("invalid lab configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}
