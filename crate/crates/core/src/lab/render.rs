use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabError;
use crate::geometry::{integrate_profile, rotate_about, Point};
use crate::imaging::{gaussian_blur, FloatImage, GrayImage};

/// Scene description for a synthetic backlit drop photograph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderParams {
    pub width: usize,
    pub height: usize,
    /// Apex radius of curvature in pixels.
    pub scale_px: f64,
    pub bond_number: f64,
    pub center_x: f64,
    pub baseline_row: f64,
    /// Scene rotation about the contact-line centre; positive lowers the right side.
    pub tilt_deg: f64,
    /// Darkening of the mirrored drop below the surface, 0 (none) to 1 (as dark as the drop).
    pub reflection_contrast: f64,
    pub noise_sigma: f64,
    pub blur_sigma: f64,
    pub background_level: f64,
    pub droplet_level: f64,
    pub stage_level: f64,
    /// Dark edge band of the stage, centred on the surface.
    pub band_thickness_px: f64,
    pub supersample: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self {
            width: 1024,
            height: 1024,
            scale_px: 100.0,
            bond_number: 0.0,
            center_x: 512.0,
            baseline_row: 600.0,
            tilt_deg: 0.0,
            reflection_contrast: 0.7,
            noise_sigma: 0.0,
            blur_sigma: 1.0,
            background_level: 220.0,
            droplet_level: 35.0,
            stage_level: 200.0,
            band_thickness_px: 4.0,
            supersample: 3,
        }
    }
}

impl RenderParams {
    /// Default scene whose drop of angle `theta_deg` and bond number `beta` has a contact
    /// diameter of `footprint_px`.
    pub fn for_footprint(theta_deg: f64, beta: f64, footprint_px: f64) -> Result<Self, LabError> {
        let p = integrate_profile(beta, 180.0, 1e-3)?;
        let xc = p.radius_at_angle(theta_deg).ok_or(LabError::InvalidAngle(theta_deg))?;
        Ok(Self { scale_px: footprint_px / (2.0 * xc), bond_number: beta, ..Self::default() })
    }

    /// Default-sized scene with the drop enlarged to span about half the frame width or a
    /// third of its height, whichever binds first, resting on the middle row.
    pub fn framed(theta_deg: f64, beta: f64) -> Result<Self, LabError> {
        let d = Self::default();
        let p = integrate_profile(beta, 180.0, 1e-3)?;
        let depth = p.depth_at_angle(theta_deg).ok_or(LabError::InvalidAngle(theta_deg))?;
        let reach = p.max_radius_above(depth);
        let scale_px = (0.25 * d.width as f64 / reach).min(0.34 * d.height as f64 / depth);
        Ok(Self { scale_px, bond_number: beta, baseline_row: d.height as f64 / 2.0, ..d })
    }
}

/// Radius of the drop silhouette as a function of depth below the apex, tabulated.
struct Silhouette {
    depth: f64,
    radius: Vec<f64>,
    max_radius: f64,
}

impl Silhouette {
    fn new(beta: f64, theta_deg: f64) -> Result<Self, LabError> {
        let p = integrate_profile(beta, 180.0, 2e-4)?;
        let depth = p.depth_at_angle(theta_deg).ok_or(LabError::InvalidAngle(theta_deg))?;
        let n = 8192;
        let radius: Vec<f64> = (0..=n).map(|i| p.x_at_depth(depth * i as f64 / n as f64).unwrap_or(0.0)).collect();
        let max_radius = radius.iter().copied().fold(0.0, f64::max);
        Ok(Self { depth, radius, max_radius })
    }

    /// Whether `(u, z)`, in apex units, lies inside the drop.
    fn contains(&self, u: f64, z: f64) -> bool {
        if !(0.0..=self.depth).contains(&z) {
            return false;
        }
        let n = self.radius.len() - 1;
        let t = z / self.depth * n as f64;
        let i = (t as usize).min(n - 1);
        let f = t - i as f64;
        u <= self.radius[i] * (1.0 - f) + self.radius[i + 1] * f
    }
}

/// Renders a drop whose outline is the profile at `rp.bond_number` cut where its tangent
/// reaches `theta_deg`, standing on a reflective stage with a dark edge band.
pub fn render_droplet<R: Rng + ?Sized>(theta_deg: f64, rp: &RenderParams, rng: &mut R) -> Result<GrayImage, LabError> {
    if !(theta_deg > 10.0 && theta_deg < 170.0) {
        return Err(LabError::InvalidAngle(theta_deg));
    }
    if !(rp.scale_px >= 30.0) {
        return Err(LabError::InvalidRender(format!("drop scale {} px below 30", rp.scale_px)));
    }
    if !(0.0..rp.height as f64).contains(&rp.baseline_row) || rp.width == 0 || rp.supersample == 0 {
        return Err(LabError::InvalidRender("baseline outside the image".into()));
    }
    let sil = Silhouette::new(rp.bond_number, theta_deg)?;
    let b = rp.scale_px;
    let (cx, yb) = (rp.center_x, rp.baseline_row);
    let apex_y = yb - b * sil.depth;
    let half_len = 1.5 * b * sil.max_radius.max(sil.depth);
    let half_band = rp.band_thickness_px / 2.0;
    let mirror = rp.stage_level - rp.reflection_contrast.clamp(0.0, 1.0) * (rp.stage_level - rp.droplet_level);

    // The drop and its reflection must stay clear of the image border.
    let pivot = Point::new(cx, yb);
    let reach = b * sil.max_radius;
    let lowest = if rp.reflection_contrast > 0.0 { yb + b * sil.depth } else { yb };
    let pad = 2.0 + 3.0 * rp.blur_sigma;
    for (x, y) in [(cx - reach, apex_y), (cx + reach, apex_y), (cx - reach, lowest), (cx + reach, lowest)] {
        let q = rotate_about(Point::new(x, y), pivot, rp.tilt_deg);
        if q.x < pad || q.y < pad || q.x > rp.width as f64 - 1.0 - pad || q.y > rp.height as f64 - 1.0 - pad {
            return Err(LabError::DropletOutOfFrame);
        }
    }

    let level = |x: f64, y: f64| -> f64 {
        let dy = y - yb;
        let u = (x - cx).abs() / b;
        if dy.abs() <= half_band && (x - cx).abs() <= half_len {
            rp.droplet_level
        } else if dy < 0.0 {
            if sil.contains(u, (y - apex_y) / b) {
                rp.droplet_level
            } else {
                rp.background_level
            }
        } else if sil.contains(u, (yb - dy - apex_y) / b) {
            mirror
        } else {
            rp.stage_level
        }
    };
    let ss = rp.supersample;
    let offsets: Vec<f64> = (0..ss).map(|k| (k as f64 + 0.5) / ss as f64 - 0.5).collect();
    let w = rp.width;
    let mut img = FloatImage::zeros(w, rp.height);
    img.data.par_chunks_mut(w).enumerate().for_each(|(py, row)| {
        for (px, out) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &oy in &offsets {
                for &ox in &offsets {
                    let q = rotate_about(Point::new(px as f64 + ox, py as f64 + oy), pivot, -rp.tilt_deg);
                    acc += level(q.x, q.y);
                }
            }
            *out = (acc / (ss * ss) as f64) as f32;
        }
    });
    if rp.blur_sigma > 0.0 {
        img = gaussian_blur(&img, rp.blur_sigma);
    }
    if rp.noise_sigma > 0.0 {
        let noise = Normal::new(0.0, rp.noise_sigma).map_err(|e| LabError::InvalidRender(e.to_string()))?;
        for v in img.data.iter_mut() {
            *v += noise.sample(rng) as f32;
        }
    }
    Ok(img.to_gray())
}
