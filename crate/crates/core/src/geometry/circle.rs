use super::{GeometryError, Point};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircleFit<T> {
    pub center: Point<T>,
    pub radius: T,
    /// Angle between the baseline and the circle tangent where they meet, measured
    /// through the drop. Image coordinates, drop above the baseline.
    pub theta_deg: T,
}

impl<T: Real> CircleFit<T> {
    /// Contact angle of this circle against a horizontal baseline at row `baseline_y`.
    pub fn theta_at(&self, baseline_y: T) -> T {
        let c = ((self.center.y - baseline_y) / self.radius).max(-T::one()).min(T::one());
        c.acos().to_degrees()
    }

    /// Topmost point of the circle (smallest y).
    pub fn top(&self) -> Point<T> {
        Point::new(self.center.x, self.center.y - self.radius)
    }
}

/// Algebraic (Kasa) least-squares circle through `points`, contact angle taken at
/// `baseline_y`.
pub fn circle_fit<T: Real>(points: &[Point<T>], baseline_y: T) -> Result<CircleFit<T>, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::CollinearPoints);
    }
    let n = T::from_usize_lossy(points.len());
    let (mx, my) = points.iter().fold((T::zero(), T::zero()), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (mx / n, my / n);
    let scale = points.iter().fold(T::zero(), |m, p| m.max((p.x - mx).abs()).max((p.y - my).abs()));
    if !(scale > T::zero()) {
        return Err(GeometryError::CollinearPoints);
    }

    // Normal equations for u^2 + v^2 + D u + E v + F = 0 in centred, scaled coordinates.
    let mut a = [[T::zero(); 3]; 3];
    let mut rhs = [T::zero(); 3];
    for p in points {
        let u = (p.x - mx) / scale;
        let v = (p.y - my) / scale;
        let row = [u, v, T::one()];
        let r = -(u * u + v * v);
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] = a[i][j] + row[i] * row[j];
            }
            rhs[i] = rhs[i] + row[i] * r;
        }
    }
    let [d, e, f] = solve3(a, rhs).ok_or(GeometryError::CollinearPoints)?;
    let cu = -d / T::lit(2.0);
    let cv = -e / T::lit(2.0);
    let r2 = cu * cu + cv * cv - f;
    if !(r2 > T::zero()) || !r2.is_finite() {
        return Err(GeometryError::CollinearPoints);
    }
    let radius = r2.sqrt() * scale;
    // A near-straight set of points fits a huge circle; treat it as collinear.
    if radius > T::lit(1e6) * scale {
        return Err(GeometryError::CollinearPoints);
    }
    let mut fit = CircleFit { center: Point::new(mx + cu * scale, my + cv * scale), radius, theta_deg: T::zero() };
    fit.theta_deg = fit.theta_at(baseline_y);
    Ok(fit)
}

fn solve3<T: Real>(mut a: [[T; 3]; 3], mut b: [T; 3]) -> Option<[T; 3]> {
    let tol = T::epsilon() * T::lit(1e3);
    let norm = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > tol * norm) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = [T::zero(); 3];
    for i in (0..3).rev() {
        let mut s = b[i];
        for k in i + 1..3 {
            s = s - a[i][k] * x[k];
        }
        x[i] = s / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn ring(cx: f64, cy: f64, r: f64, from: f64, to: f64, n: usize) -> Vec<Point<f64>> {
        (0..n)
            .map(|i| {
                let t = (from + (to - from) * i as f64 / (n - 1) as f64).to_radians();
                Point::new(cx + r * t.cos(), cy + r * t.sin())
            })
            .collect()
    }

    #[test]
    fn hemisphere_is_ninety_degrees() {
        // Upper half in image coordinates: angles 180..360.
        let pts = ring(0.0, 0.0, 100.0, 180.0, 360.0, 50);
        let fit = circle_fit(&pts, 0.0).unwrap();
        assert!((fit.radius - 100.0).abs() < 1e-9);
        assert!((fit.theta_deg - 90.0).abs() < 1e-9);
    }

    #[test]
    fn spherical_cap_sixty_degrees() {
        // Centre 50 px below the baseline row, cap height 50.
        let pts = ring(0.0, 50.0, 100.0, 240.0, 300.0, 40);
        let fit = circle_fit(&pts, 0.0).unwrap();
        assert!((fit.center.y - 50.0).abs() < 1e-8);
        assert!((fit.theta_deg - 60.0).abs() < 1e-8);
    }

    #[test]
    fn noisy_radius_within_one_percent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let pts: Vec<_> = ring(400.0, 300.0, 100.0, 200.0, 340.0, 300)
            .into_iter()
            .map(|p| Point::new(p.x + noise.sample(&mut rng), p.y + noise.sample(&mut rng)))
            .collect();
        let fit = circle_fit(&pts, 300.0).unwrap();
        assert!((fit.radius - 100.0).abs() < 1.0, "{}", fit.radius);
    }

    #[test]
    fn degenerate_inputs() {
        let line: Vec<_> = (0..10).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(circle_fit(&line, 0.0), Err(GeometryError::CollinearPoints));
        assert_eq!(circle_fit(&line[..2], 0.0), Err(GeometryError::CollinearPoints));
    }

    #[test]
    fn works_in_single_precision() {
        let pts: Vec<Point<f32>> =
            ring(10.0, 20.0, 30.0, 190.0, 350.0, 30).into_iter().map(|p| Point::new(p.x as f32, p.y as f32)).collect();
        let fit = circle_fit(&pts, 20.0f32).unwrap();
        assert!((fit.radius - 30.0).abs() < 1e-3);
    }
}
