//! Contact-angle extraction from backlit drop photographs: filtering, region of interest,
//! thresholding, contour tracing, baseline and contact detection, then profile fitting.

mod baseline;
mod contact;
mod contour;
mod filter;
mod image;
mod measure;
mod threshold;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use baseline::{detect_baseline, separate_stage, BaselineEstimate, MAX_BASELINE_TILT_DEG};
pub use contact::{find_contact_points, AngleRegime, ContactOptions, ContactPoints};
pub use contour::{extract_contours, refine_subpixel, Contour};
pub use filter::{
    crop_and_resize, crop_and_resize_float, gaussian_blur, gaussian_kernel, locate_roi, preprocess, preprocess_float,
    resized_to_source, sobel_magnitude, sobel_magnitude_float, Roi,
};
pub use image::{BinaryImage, FloatImage, GrayImage, RawImage};
pub use measure::{measure_contact_angle, measure_png, Diagnostics, MeasureParams, MeasurementResult, QualityFlag};
pub use threshold::{between_class_variance, histogram, otsu_threshold, Otsu};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImagingError {
    #[error("image is empty or its buffer does not match its dimensions")]
    EmptyImage,
    #[error("image {width}x{height} is too small for a 3x3 operator")]
    ImageTooSmall { width: usize, height: usize },
    #[error("region of interest lies outside the image or is smaller than 4 px")]
    RoiOutOfBounds,
    #[error("histogram has a single gray level")]
    DegenerateHistogram,
    #[error("no foreground pixels")]
    NoForeground,
    #[error("no stage baseline found")]
    NoBaselineFound,
    #[error("no contact point found near the baseline")]
    AmbiguousContact,
    #[error("image border is darker than its interior; expected a bright backlight")]
    InvertedImage,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("image codec: {0}")]
    Codec(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}
