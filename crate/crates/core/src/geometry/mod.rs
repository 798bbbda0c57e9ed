//! Axisymmetric drop-shape geometry: Bashforth-Adams profiles, circle fits, tilt
//! correction and least-squares profile fitting.
//!
//! All routines work in image coordinates (y grows downward) and are generic over the
//! scalar type.

mod circle;
mod fit;
mod profile;
mod simplex;
mod tilt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Real;

pub use circle::{circle_fit, CircleFit};
pub use fit::{fit_bashforth_adams, rmse, BaFit, FitOptions, ProfileTransform};
pub use profile::{integrate_profile, BaProfile, ProfilePoint};
pub use simplex::{nelder_mead, SimplexOptions, SimplexResult};
pub use tilt::{rotate_about, tilt_correct, TiltCorrection};

pub type BaFit64 = BaFit<f64>;
pub type BaFit32 = BaFit<f32>;
pub type BaProfile64 = BaProfile<f64>;
pub type BaProfile32 = BaProfile<f32>;
pub type CircleFit64 = CircleFit<f64>;
pub type CircleFit32 = CircleFit<f32>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("integration step too large: phi advanced {advance_deg:.2} deg in one step")]
    StepTooLarge { advance_deg: f64 },
    #[error("profile integration did not reach phi_max within {steps} steps")]
    ProfileNotClosed { steps: usize },
    #[error("invalid profile parameters: {0}")]
    InvalidParameters(String),
    #[error("points are collinear or too few for a circle fit")]
    CollinearPoints,
    #[error("contact points coincide")]
    DegenerateContactSegment,
    #[error("tilt of {0:.2} deg exceeds the 15 deg correction limit")]
    ExcessiveTilt(f64),
    #[error("arc has {0} points, at least 10 are required")]
    DegenerateArc(usize),
    #[error("profile fit diverged: {0}")]
    FitDiverged(String),
}

/// 2-D point in pixel (or profile) units. Serializes as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 2]", into = "[T; 2]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Point<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Self) -> T {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

impl<T> From<[T; 2]> for Point<T> {
    fn from([x, y]: [T; 2]) -> Self {
        Self { x, y }
    }
}

impl<T> From<Point<T>> for [T; 2] {
    fn from(p: Point<T>) -> Self {
        [p.x, p.y]
    }
}
