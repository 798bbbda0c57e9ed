use std::collections::VecDeque;

use super::{BinaryImage, FloatImage, ImagingError};
use crate::geometry::Point;

/// Clockwise (in image coordinates) 8-neighbourhood starting east.
const DIRS: [(isize, isize); 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Boundary of one foreground component, ordered clockwise from its top-left pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub points: Vec<Point<f64>>,
    pub closed: bool,
    /// Pixel count of the traced component.
    pub area: usize,
}

impl Contour {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Chain-code length with unit axial and sqrt(2) diagonal steps.
    pub fn chain_length(&self) -> f64 {
        self.steps().map(|(dx, dy)| dx.hypot(dy)).sum()
    }

    /// Perimeter with Kulpa's isotropic weights for axial and diagonal chain steps.
    pub fn perimeter(&self) -> f64 {
        let axial = std::f64::consts::PI * (1.0 + std::f64::consts::SQRT_2) / 8.0;
        self.steps().map(|(dx, dy)| if dx != 0.0 && dy != 0.0 { axial * std::f64::consts::SQRT_2 } else { axial }).sum()
    }

    fn steps(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let n = self.points.len();
        let m = if self.closed { n } else { n.saturating_sub(1) };
        (0..m).map(move |i| {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            (b.x - a.x, b.y - a.y)
        })
    }

    /// Index of the topmost point; the middle of the run if several share that row.
    pub fn apex_index(&self) -> Option<usize> {
        let ymin = self.points.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let top: Vec<usize> = (0..self.points.len()).filter(|&i| self.points[i].y == ymin).collect();
        if top.is_empty() {
            return None;
        }
        let mean_x = top.iter().map(|&i| self.points[i].x).sum::<f64>() / top.len() as f64;
        top.into_iter()
            .min_by(|&a, &b| (self.points[a].x - mean_x).abs().partial_cmp(&(self.points[b].x - mean_x).abs()).unwrap())
    }
}

/// Outer boundaries of all 8-connected foreground components traced by Moore neighbour
/// following, largest component first. Components with fewer than three boundary pixels
/// are skipped.
pub fn extract_contours(b: &BinaryImage) -> Result<Vec<Contour>, ImagingError> {
    let (w, h) = (b.width, b.height);
    let mut seen = vec![false; w * h];
    let mut queue = VecDeque::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if seen[start] || !b.data[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut area = 0;
        while let Some(i) = queue.pop_front() {
            area += 1;
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if b.get_or_false(nx, ny) {
                    let j = ny as usize * w + nx as usize;
                    if !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        let points = trace(b, ((start % w) as isize, (start / w) as isize));
        if points.len() >= 3 {
            out.push(Contour { points, closed: true, area });
        }
    }
    if out.is_empty() {
        return Err(ImagingError::NoForeground);
    }
    out.sort_by_key(|c| std::cmp::Reverse(c.area));
    Ok(out)
}

fn trace(b: &BinaryImage, s: (isize, isize)) -> Vec<Point<f64>> {
    let to_point = |p: (isize, isize)| Point::new(p.0 as f64, p.1 as f64);
    let mut pts = vec![to_point(s)];
    // Raster order guarantees the west neighbour of the start is background.
    let next = |p: (isize, isize), back: usize| -> Option<(usize, (isize, isize))> {
        (1..=8).map(|k| (back + k) % 8).find_map(|d| {
            let q = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            b.get_or_false(q.0, q.1).then_some((d, q))
        })
    };
    let Some((d0, q0)) = next(s, 4) else {
        return pts;
    };
    let (mut p, mut d) = (q0, d0);
    let limit = 4 * b.width * b.height + 8;
    for _ in 0..limit {
        // The neighbour examined just before the move, seen from the new pixel.
        let back = (d + 5) % 8;
        let Some((nd, q)) = next(p, back) else { break };
        if p == s && q == q0 {
            break;
        }
        pts.push(to_point(p));
        p = q;
        d = nd;
    }
    pts
}

/// Moves each point along the local intensity gradient to where the bilinearly
/// interpolated gray level crosses `level`. Points without a nearby crossing are kept.
pub fn refine_subpixel(points: &[Point<f64>], gray: &FloatImage, level: f64) -> Vec<Point<f64>> {
    points
        .iter()
        .map(|&p| {
            let gx = gray.sample(p.x + 1.0, p.y) - gray.sample(p.x - 1.0, p.y);
            let gy = gray.sample(p.x, p.y + 1.0) - gray.sample(p.x, p.y - 1.0);
            let norm = gx.hypot(gy);
            if norm < 1e-6 {
                return p;
            }
            let (nx, ny) = (gx / norm, gy / norm);
            let f = |s: f64| gray.sample(p.x + s * nx, p.y + s * ny) - level;
            let step = 0.25;
            let mut best: Option<f64> = None;
            for k in -10..10 {
                let (s0, s1) = (k as f64 * step, (k + 1) as f64 * step);
                let (f0, f1) = (f(s0), f(s1));
                if f0 <= 0.0 && f1 > 0.0 {
                    let s = s0 + step * (-f0) / (f1 - f0);
                    if best.is_none_or(|b| s.abs() < b.abs()) {
                        best = Some(s);
                    }
                }
            }
            match best {
                Some(s) => Point::new(p.x + s * nx, p.y + s * ny),
                None => p,
            }
        })
        .collect()
}
