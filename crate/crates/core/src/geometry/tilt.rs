use super::{GeometryError, Point};
use crate::Real;

/// Largest tilt the correction step accepts.
pub const MAX_TILT_DEG: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct TiltCorrection<T> {
    pub points: Vec<Point<T>>,
    pub left_cp: Point<T>,
    pub right_cp: Point<T>,
    /// Rotation applied to level the contact segment; the negative of its original slope angle.
    pub rotation_deg: T,
    pub pivot: Point<T>,
}

/// Rotates `p` by `angle_deg` about `pivot` (positive turns +x toward +y).
pub fn rotate_about<T: Real>(p: Point<T>, pivot: Point<T>, angle_deg: T) -> Point<T> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let dx = p.x - pivot.x;
    let dy = p.y - pivot.y;
    Point::new(pivot.x + c * dx - s * dy, pivot.y + s * dx + c * dy)
}

/// Levels the contact segment by rotating every point about its midpoint.
pub fn tilt_correct<T: Real>(
    points: &[Point<T>],
    left_cp: Point<T>,
    right_cp: Point<T>,
) -> Result<TiltCorrection<T>, GeometryError> {
    let dx = right_cp.x - left_cp.x;
    let dy = right_cp.y - left_cp.y;
    if !(dx.hypot(dy) > T::epsilon()) {
        return Err(GeometryError::DegenerateContactSegment);
    }
    let rotation_deg = -dy.atan2(dx).to_degrees();
    if rotation_deg.abs() > T::lit(MAX_TILT_DEG) {
        return Err(GeometryError::ExcessiveTilt(rotation_deg.as_f64()));
    }
    let two = T::lit(2.0);
    let pivot = Point::new((left_cp.x + right_cp.x) / two, (left_cp.y + right_cp.y) / two);
    let rot = |p: Point<T>| rotate_about(p, pivot, rotation_deg);
    Ok(TiltCorrection {
        points: points.iter().copied().map(rot).collect(),
        left_cp: rot(left_cp),
        right_cp: rot(right_cp),
        rotation_deg,
        pivot,
    })
}
