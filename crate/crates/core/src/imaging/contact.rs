use serde::{Deserialize, Serialize};

use super::{BaselineEstimate, Contour, ImagingError};
use crate::geometry::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPoints {
    pub left: Point<f64>,
    pub right: Point<f64>,
    /// Contour from the left contact through the apex to the right contact.
    pub arc: Vec<Point<f64>>,
    pub apex: Point<f64>,
    /// Direction change used on each side (1 below 90 deg, 2 above); 0 for the fallback.
    pub change_used: (usize, usize),
    pub regime: AngleRegime,
    pub reflection_missing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleRegime {
    /// Widest at the surface: the first x reversal is the contact.
    Wetting,
    /// Bulge above the surface: the first reversal is the equator, the second the contact.
    NonWetting,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactOptions {
    /// Minimum backtrack in x before a reversal counts.
    pub hysteresis_px: f64,
    /// Extra rows treated as part of the stage band.
    pub band_margin_px: f64,
}

impl Default for ContactOptions {
    fn default() -> Self {
        Self { hysteresis_px: 2.0, band_margin_px: 1.0 }
    }
}

/// Walks `indices` along the contour and returns the position of each reversal of the
/// outward coordinate `side * along(p)` with hysteresis. Each reported value is the walk
/// position where the extreme was first reached.
fn reversals(
    c: &Contour,
    indices: impl Iterator<Item = usize>,
    along: impl Fn(&Point<f64>) -> f64,
    side: f64,
    h: f64,
    want: usize,
) -> Vec<usize> {
    let mut out = Vec::new();
    let mut dir = 1.0;
    let mut ext = f64::NEG_INFINITY;
    let mut ext_i = 0;
    for (k, i) in indices.enumerate() {
        let xi = side * along(&c.points[i]);
        if dir * xi > dir * ext || ext.is_infinite() {
            ext = xi;
            ext_i = k;
        } else if dir * (ext - xi) > h {
            out.push(ext_i);
            if out.len() == want {
                break;
            }
            dir = -dir;
            ext = xi;
            ext_i = k;
        }
    }
    out
}

/// Finds the contact points by counting x reversals down each side of the drop outline
/// from the apex: the first reversal for a wetting drop, the second when the drop bulges
/// above the surface. Without a visible reflection the outline's arrival at the stage band
/// is used and `reflection_missing` is set.
pub fn find_contact_points(
    c: &Contour,
    base: &BaselineEstimate,
    opts: &ContactOptions,
) -> Result<ContactPoints, ImagingError> {
    let n = c.len();
    let a = c.apex_index().ok_or(ImagingError::AmbiguousContact)?;
    let apex = c.points[a];
    let h = opts.hysteresis_px;
    let above_band = |p: &Point<f64>| p.y < base.top_at(p.x) - opts.band_margin_px;
    let forward = move |k: usize| (a + k) % n;
    let backward = move |k: usize| (a + n - k % n) % n;

    // Row widths of the drop above the band decide the regime. Rows are levelled against
    // the baseline so a tilted stage does not skew them.
    let mut rows: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    for p in c.points.iter().filter(|p| above_band(p)) {
        let e = rows
            .entry((p.y - base.y_at(p.x) + base.y_row).round() as i64)
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        e.0 = e.0.min(p.x);
        e.1 = e.1.max(p.x);
    }
    let (&bottom_row, _) = rows.iter().next_back().ok_or(ImagingError::AmbiguousContact)?;
    let width = |r: &(f64, f64)| r.1 - r.0;
    let (max_row, max_w) =
        rows.iter().map(|(&y, r)| (y, width(r))).fold((0, f64::MIN), |m, v| if v.1 > m.1 { v } else { m });
    // Reference rows sit clear of the band, whose blurred edge widens the last few rows.
    let ref_row = bottom_row - 2 - h.ceil() as i64;
    let bottom_w = rows.range(ref_row - 2..=ref_row).map(|(_, r)| width(r)).fold(f64::MIN, f64::max);
    let regime = if max_w - bottom_w > 2.0 * h && (max_row as f64) < ref_row as f64 - h {
        AngleRegime::NonWetting
    } else {
        AngleRegime::Wetting
    };

    let reflection_missing = !c.points.iter().any(|p| p.y > base.bottom_at(p.x) + opts.band_margin_px + 1.0);
    let drop_height = base.y_at(apex.x) - apex.y;
    let tol = base.half_thickness() + opts.band_margin_px + 3.0 * h + 0.03 * drop_height;

    let near = |i: usize| {
        let p = c.points[i];
        (p.y - base.y_at(p.x)).abs() <= tol
    };
    // Position along the baseline direction, so the extremes are those of the levelled drop.
    let norm = base.slope.hypot(1.0);
    let along = |p: &Point<f64>| (p.x + base.slope * p.y) / norm;
    let at_band = |p: &Point<f64>| p.y >= base.top_at(p.x) - opts.band_margin_px - 2.0;
    // Walks one side from the apex. The contact is the first of the chosen reversal and the
    // outline's arrival at the cleared band; without a reflection only the arrival counts.
    let side_contact = |idx: &dyn Fn(usize) -> usize, side: f64| -> Option<(usize, usize)> {
        let arrival = (0..n).find(|&k| at_band(&c.points[idx(k)]));
        if reflection_missing {
            return arrival.map(|k| (idx(k), 0));
        }
        let revs = reversals(c, (0..n).map(idx), along, side, h, 3);
        let near_k = |k: usize| near(idx(k));
        // The regime picks the reversal; a bulge too small to classify shows up as a first
        // reversal well above the surface followed by one at it.
        let chosen = match regime {
            AngleRegime::NonWetting if revs.len() > 1 && near_k(revs[1]) => Some((revs[1], 2)),
            _ => revs.iter().position(|&k| near_k(k)).map(|j| (revs[j], j + 1)),
        };
        match (chosen, arrival) {
            (Some((kr, _)), Some(ka)) if ka < kr => Some((idx(ka), revs.iter().filter(|&&k| k < ka).count() + 1)),
            (Some((kr, ord)), _) => Some((idx(kr), ord)),
            (None, Some(ka)) => Some((idx(ka), revs.iter().filter(|&&k| k < ka).count() + 1)),
            (None, None) => None,
        }
    };
    let (li, lk) = side_contact(&backward, -1.0).ok_or(ImagingError::AmbiguousContact)?;
    let (ri, rk) = side_contact(&forward, 1.0).ok_or(ImagingError::AmbiguousContact)?;
    let change_used = (lk, rk);
    let regime = if change_used.0.max(change_used.1) >= 2 { AngleRegime::NonWetting } else { regime };
    if !(near(li) && near(ri)) {
        return Err(ImagingError::AmbiguousContact);
    }
    let snap = |p: Point<f64>| Point::new(p.x, base.y_at(p.x));
    let (left, right) = (snap(c.points[li]), snap(c.points[ri]));
    if left.x >= right.x {
        return Err(ImagingError::AmbiguousContact);
    }
    let left_steps = (a + n - li) % n;
    let right_steps = (ri + n - a) % n;
    let mut arc: Vec<Point<f64>> = (0..=left_steps).rev().map(|k| c.points[backward(k)]).collect();
    arc.extend((1..=right_steps).map(|k| c.points[forward(k)]));
    Ok(ContactPoints { left, right, arc, apex, change_used, regime, reflection_missing })
}
