use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    crop_and_resize_float, detect_baseline, extract_contours, find_contact_points, locate_roi, otsu_threshold,
    preprocess_float, refine_subpixel, resized_to_source, separate_stage, sobel_magnitude_float, AngleRegime,
    ContactOptions, ImagingError, RawImage, Roi,
};
use crate::geometry::{fit_bashforth_adams, tilt_correct, FitOptions, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityFlag {
    /// No reflection below the stage; contacts taken where the outline meets the band.
    ReflectionMissing,
    /// Only the upper edge of the stage band was found.
    BaselineTopEdgeOnly,
    /// The square region of interest was clipped by the image border.
    RoiClipped,
    /// The profile fit stopped on its evaluation budget.
    FitNotConverged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureParams {
    pub sigma: f64,
    pub resize: usize,
    /// Gradient level, relative to the maximum, that delimits the drop region.
    pub gradient_fraction: f32,
    pub roi_margin: f64,
    pub contact: ContactOptions,
    /// Arc points closer than this to the stage band (resized px, on top of the blur
    /// reach) are not fitted.
    pub fit_exclusion_px: f64,
    pub subpixel: bool,
    pub fit: FitOptions<f64>,
}

impl Default for MeasureParams {
    fn default() -> Self {
        Self {
            sigma: 2.0,
            resize: 1000,
            gradient_fraction: 0.3,
            roi_margin: 0.1,
            contact: ContactOptions::default(),
            fit_exclusion_px: 2.0,
            subpixel: true,
            fit: FitOptions::default(),
        }
    }
}

/// Intermediate values kept for inspection; not part of the serialized result.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    pub roi: Option<Roi>,
    pub threshold: u8,
    /// Baseline row and tilt in the resized crop.
    pub baseline_row: f64,
    pub baseline_tilt_deg: f64,
    pub rotation_deg: f64,
    pub regime: Option<AngleRegime>,
    pub change_used: (usize, usize),
    pub arc_points: usize,
    pub fit_evaluations: usize,
    pub scale_b: f64,
}

/// One analysed image. Contact points and apex are in source-image pixels; the RMSE is in
/// pixels of the resized crop the fit ran on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementResult {
    pub angle_deg: f64,
    pub rmse_px: f64,
    pub left_cp: Point<f64>,
    pub right_cp: Point<f64>,
    pub bond_number: f64,
    pub flags: BTreeSet<QualityFlag>,
    #[serde(skip)]
    pub apex: Point<f64>,
    #[serde(skip)]
    pub diagnostics: Diagnostics,
}

pub fn measure_png(path: impl AsRef<Path>, params: &MeasureParams) -> Result<MeasurementResult, ImagingError> {
    measure_contact_angle(&RawImage::open(path)?, params)
}

pub fn measure_contact_angle(raw: &RawImage, params: &MeasureParams) -> Result<MeasurementResult, ImagingError> {
    let mut flags = BTreeSet::new();
    let gray = preprocess_float(raw, params.sigma)?;
    check_backlight(&gray)?;
    let grad = sobel_magnitude_float(&gray)?;
    let (roi, clipped) = locate_roi(&grad, params.gradient_fraction, params.roi_margin)?;
    if clipped {
        flags.insert(QualityFlag::RoiClipped);
    }
    let crop = crop_and_resize_float(&gray, roi, params.resize)?;
    let otsu = otsu_threshold(&crop.to_gray())?;
    let base = detect_baseline(&otsu.binary)?;
    if base.top_edge_only {
        flags.insert(QualityFlag::BaselineTopEdgeOnly);
    }
    let mask = separate_stage(&otsu.binary, &base, params.contact.band_margin_px);
    let contours = extract_contours(&mask)?;
    let contact = find_contact_points(&contours[0], &base, &params.contact)?;
    if contact.reflection_missing {
        flags.insert(QualityFlag::ReflectionMissing);
    }

    let mag = params.resize as f64 / roi.width.max(roi.height) as f64;
    let reach = params.contact.band_margin_px + params.fit_exclusion_px + 3.0 * params.sigma * mag;
    let arc: Vec<Point<f64>> = contact.arc.iter().copied().filter(|p| p.y < base.top_at(p.x) - reach).collect();
    let arc = if params.subpixel {
        let level = (otsu.foreground_mean + otsu.background_mean) / 2.0;
        refine_subpixel(&arc, &crop, level)
    } else {
        arc
    };
    let leveled = tilt_correct(&arc, contact.left, contact.right)?;
    let baseline_y = leveled.left_cp.y;
    let fit = fit_bashforth_adams(&leveled.points, baseline_y, &params.fit)?;
    if !fit.converged {
        flags.insert(QualityFlag::FitNotConverged);
    }

    let to_src = |p: Point<f64>| {
        let (x, y) = resized_to_source(roi, params.resize, p.x, p.y);
        Point::new(x, y)
    };
    let apex_resized = crate::geometry::rotate_about(fit.apex, leveled.pivot, -leveled.rotation_deg);
    Ok(MeasurementResult {
        angle_deg: fit.theta_deg,
        rmse_px: fit.rmse_px,
        left_cp: to_src(contact.left),
        right_cp: to_src(contact.right),
        bond_number: fit.bond_number,
        flags,
        apex: to_src(apex_resized),
        diagnostics: Diagnostics {
            roi: Some(roi),
            threshold: otsu.threshold,
            baseline_row: base.y_row,
            baseline_tilt_deg: base.tilt_deg,
            rotation_deg: leveled.rotation_deg,
            regime: Some(contact.regime),
            change_used: contact.change_used,
            arc_points: arc.len(),
            fit_evaluations: fit.evaluations,
            scale_b: fit.scale_b,
        },
    })
}

/// The backlight must make the border brighter than the midpoint of the gray range.
fn check_backlight(g: &super::FloatImage) -> Result<(), ImagingError> {
    let (w, h) = (g.width, g.height);
    let (lo, hi) = g.data.iter().fold((f32::MAX, f32::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo < 1.0 {
        return Err(ImagingError::DegenerateHistogram);
    }
    let mut sum = 0.0f64;
    let mut n = 0usize;
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x + 1 == w || y + 1 == h {
                sum += f64::from(g.get(x, y));
                n += 1;
            }
        }
    }
    if sum / (n as f64) < f64::from(lo + hi) / 2.0 {
        return Err(ImagingError::InvertedImage);
    }
    Ok(())
}
