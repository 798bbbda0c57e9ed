use serde::{Deserialize, Serialize};

use super::{BinaryImage, ImagingError};

/// Largest baseline slope searched.
pub const MAX_BASELINE_TILT_DEG: f64 = 15.0;

/// Solid-surface line `y = intercept + slope * x` in pixel-boundary coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineEstimate {
    /// Row of the surface at the centre column.
    pub y_row: f64,
    pub tilt_deg: f64,
    pub slope: f64,
    pub intercept: f64,
    /// Upper and lower edges of the dark stage band (equal to the baseline when only the
    /// upper edge was found).
    pub band_top: f64,
    pub band_bottom: f64,
    /// True when no lower band edge was found and the upper edge is the baseline.
    pub top_edge_only: bool,
    /// Fraction of image columns supporting the upper edge.
    pub support: f64,
}

impl BaselineEstimate {
    #[inline]
    pub fn y_at(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }

    /// Upper band edge at column `x`.
    #[inline]
    pub fn top_at(&self, x: f64) -> f64 {
        self.y_at(x) - (self.y_row - self.band_top)
    }

    /// Lower band edge at column `x`.
    #[inline]
    pub fn bottom_at(&self, x: f64) -> f64 {
        self.y_at(x) + (self.band_bottom - self.y_row)
    }

    pub fn half_thickness(&self) -> f64 {
        (self.band_bottom - self.band_top) / 2.0
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    intercept: f64,
    slope: f64,
    columns: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Pick {
    Lowest,
    Highest,
}

/// Hough vote over lines of the given slopes through `pts`. Among lines whose column
/// support reaches `min_support` and half of the strongest, returns the lowest or highest
/// in the image (evaluated at the centre column), optionally restricted to a window of
/// centre rows.
fn hough_line(
    pts: &[(f64, f64)],
    width: usize,
    slopes: &[f64],
    min_support: usize,
    window: Option<(f64, f64)>,
    pick: Pick,
) -> Option<Line> {
    if pts.is_empty() {
        return None;
    }
    let xc = width as f64 / 2.0;
    let ymax = pts.iter().map(|p| p.1).fold(0.0, f64::max) + width as f64;
    let nbins = (2.0 * ymax).ceil() as usize + 4;
    let mut candidates: Vec<(usize, f64, f64)> = Vec::new();
    let mut bins = vec![0usize; nbins];
    for &slope in slopes {
        bins.iter_mut().for_each(|b| *b = 0);
        for &(x, y) in pts {
            let r = y - slope * x + ymax / 2.0;
            if r >= 0.0 && (r as usize) < nbins {
                bins[r as usize] += 1;
            }
        }
        for (i, &c) in bins.iter().enumerate() {
            let n = c + if i + 1 < nbins { bins[i + 1] } else { 0 };
            if n < min_support {
                continue;
            }
            let intercept = i as f64 + 1.0 - ymax / 2.0;
            if let Some((lo, hi)) = window {
                let y_mid = intercept + slope * xc;
                if !(y_mid > lo && y_mid <= hi) {
                    continue;
                }
            }
            candidates.push((n, slope, intercept));
        }
    }
    let best = candidates.iter().map(|c| c.0).max()?;
    let mid = |l: &Line| l.intercept + l.slope * xc;
    let lines = candidates
        .iter()
        .filter(|c| c.0 * 2 >= best)
        .map(|&(_, slope, intercept)| refine(pts, slope, intercept))
        .filter(|l| l.columns >= min_support);
    match pick {
        Pick::Lowest => lines.max_by(|a, b| mid(a).partial_cmp(&mid(b)).unwrap()),
        Pick::Highest => lines.min_by(|a, b| mid(a).partial_cmp(&mid(b)).unwrap()),
    }
}

/// Least-squares refit on points within 1.5 px of the line, twice.
fn refine(pts: &[(f64, f64)], mut slope: f64, mut intercept: f64) -> Line {
    let mut columns = 0;
    for _ in 0..3 {
        let inl: Vec<&(f64, f64)> = pts.iter().filter(|(x, y)| (y - intercept - slope * x).abs() <= 1.5).collect();
        if inl.len() < 2 {
            break;
        }
        let n = inl.len() as f64;
        let (sx, sy) = inl.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
        let (mx, my) = (sx / n, sy / n);
        let (sxx, sxy) = inl.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx).powi(2), a.1 + (p.0 - mx) * (p.1 - my)));
        if sxx > 0.0 {
            slope = sxy / sxx;
        }
        intercept = my - slope * mx;
        let mut cols: Vec<i64> = inl.iter().map(|p| p.0 as i64).collect();
        cols.sort_unstable();
        cols.dedup();
        columns = cols.len();
    }
    Line { intercept, slope, columns }
}

/// Locates the solid surface from the upper (and, when present, lower) edge of the dark
/// stage band. Edge positions are taken on pixel boundaries.
pub fn detect_baseline(b: &BinaryImage) -> Result<BaselineEstimate, ImagingError> {
    let (w, h) = (b.width, b.height);
    let mut tops = Vec::new();
    let mut bottoms = Vec::new();
    for y in 1..h.saturating_sub(1) {
        for x in 0..w {
            if b.get(x, y) {
                if !b.get(x, y - 1) {
                    tops.push((x as f64, y as f64 - 0.5));
                }
                if !b.get(x, y + 1) {
                    bottoms.push((x as f64, y as f64 + 0.5));
                }
            }
        }
    }
    let min_support = (0.2 * w as f64).ceil() as usize;
    let steps = (2.0 * MAX_BASELINE_TILT_DEG / 0.2).round() as i32;
    let slopes: Vec<f64> = (0..=steps).map(|k| (-MAX_BASELINE_TILT_DEG + 0.2 * k as f64).to_radians().tan()).collect();
    let top = hough_line(&tops, w, &slopes, min_support, None, Pick::Lowest).ok_or(ImagingError::NoBaselineFound)?;
    let xc = w as f64 / 2.0;
    let top_mid = top.intercept + top.slope * xc;
    // The lower band edge runs parallel to the upper one and is the first such line below it.
    let a = top.slope.atan();
    let parallel: Vec<f64> = (-3..=3).map(|k| (a + (0.2 * k as f64).to_radians()).tan()).collect();
    let max_thickness = 0.1 * h as f64;
    let bottom = hough_line(
        &bottoms,
        w,
        &parallel,
        top.columns.div_ceil(2),
        Some((top_mid, top_mid + max_thickness)),
        Pick::Highest,
    );
    let (slope, intercept, band_top, band_bottom, top_only) = match bottom {
        Some(bl) => {
            let slope = (top.slope + bl.slope) / 2.0;
            let bottom_mid = bl.intercept + bl.slope * xc;
            let mid = (top_mid + bottom_mid) / 2.0;
            (slope, mid - slope * xc, top_mid, bottom_mid, false)
        }
        None => (top.slope, top.intercept, top_mid, top_mid, true),
    };
    let y_row = intercept + slope * xc;
    if !(0.0..h as f64).contains(&y_row) {
        return Err(ImagingError::NoBaselineFound);
    }
    Ok(BaselineEstimate {
        y_row,
        tilt_deg: slope.atan().to_degrees(),
        slope,
        intercept,
        band_top,
        band_bottom,
        top_edge_only: top_only,
        support: top.columns as f64 / w as f64,
    })
}

/// Removes the stage band from the mask except in columns where it joins foreground
/// directly above and below it (the drop meeting its reflection). With only an upper
/// edge known, everything from the baseline down is cleared.
pub fn separate_stage(b: &BinaryImage, base: &BaselineEstimate, margin: f64) -> BinaryImage {
    let mut out = b.clone();
    let h = b.height as isize;
    for x in 0..b.width {
        let xf = x as f64;
        let y0 = (base.top_at(xf) + 0.5 - margin).floor() as isize;
        if base.top_edge_only {
            for y in y0.max(0)..h {
                out.set(x, y as usize, false);
            }
            continue;
        }
        let y1 = (base.bottom_at(xf) - 0.5 + margin).ceil() as isize;
        let bridged = b.get_or_false(x as isize, y0 - 1) && b.get_or_false(x as isize, y1 + 1);
        if !bridged {
            for y in y0.max(0)..=y1.min(h - 1) {
                out.set(x, y as usize, false);
            }
        }
    }
    out
}
