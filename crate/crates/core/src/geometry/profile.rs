use super::GeometryError;
use crate::Real;

/// One sample of a dimensionless profile. Lengths are in units of the apex radius of
/// curvature; `z` grows from the apex toward the solid surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint<T> {
    pub s: T,
    pub x: T,
    pub z: T,
    pub phi: T,
}

/// Sessile-drop meridian from the apex, sampled along arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct BaProfile<T> {
    pub bond_number: T,
    pub step: T,
    pub points: Vec<ProfilePoint<T>>,
}

#[inline]
fn rhs<T: Real>(beta: T, x: T, z: T, phi: T) -> (T, T, T) {
    // sin(phi)/x tends to the apex curvature (1 in these units) as s -> 0.
    let ratio = if x <= T::epsilon() { T::one() } else { phi.sin() / x };
    (phi.cos(), phi.sin(), T::lit(2.0) + beta * z - ratio)
}

/// Integrates dx/ds = cos(phi), dz/ds = sin(phi), dphi/ds = 2 + beta*z - sin(phi)/x from the
/// apex with classical fixed-step RK4 until phi reaches `phi_max_deg`.
pub fn integrate_profile<T: Real>(beta: T, phi_max_deg: T, step: T) -> Result<BaProfile<T>, GeometryError> {
    if !(beta >= T::zero()) || !beta.is_finite() {
        return Err(GeometryError::InvalidParameters(format!("bond number {beta} must be >= 0")));
    }
    if !(phi_max_deg > T::zero() && phi_max_deg <= T::lit(180.0)) {
        return Err(GeometryError::InvalidParameters(format!("phi_max {phi_max_deg} outside (0, 180]")));
    }
    if !(step > T::zero()) {
        return Err(GeometryError::InvalidParameters(format!("step {step} must be > 0")));
    }
    let phi_max = phi_max_deg.to_radians();
    let max_overshoot = T::lit(5.0).to_radians();
    // The meridian length to phi = 180 deg is at most pi for beta >= 0.
    let max_steps = (T::lit(8.0) / step).to_usize().unwrap_or(usize::MAX).max(16);

    let (mut s, mut x, mut z, mut phi) = (T::zero(), T::zero(), T::zero(), T::zero());
    let mut points = Vec::with_capacity((T::lit(3.5) / step).to_usize().unwrap_or(0) + 2);
    points.push(ProfilePoint { s, x, z, phi });
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);

    for _ in 0..max_steps {
        if phi >= phi_max {
            return Ok(BaProfile { bond_number: beta, step, points });
        }
        let k1 = rhs(beta, x, z, phi);
        let k2 = rhs(beta, x + half * step * k1.0, z + half * step * k1.1, phi + half * step * k1.2);
        let k3 = rhs(beta, x + half * step * k2.0, z + half * step * k2.1, phi + half * step * k2.2);
        let k4 = rhs(beta, x + step * k3.0, z + step * k3.1, phi + step * k3.2);
        let dphi = step * sixth * (k1.2 + two * k2.2 + two * k3.2 + k4.2);
        if dphi.abs() > max_overshoot {
            return Err(GeometryError::StepTooLarge { advance_deg: dphi.to_degrees().as_f64() });
        }
        x = x + step * sixth * (k1.0 + two * k2.0 + two * k3.0 + k4.0);
        z = z + step * sixth * (k1.1 + two * k2.1 + two * k3.1 + k4.1);
        phi = phi + dphi;
        s = s + step;
        points.push(ProfilePoint { s, x, z, phi });
    }
    Err(GeometryError::ProfileNotClosed { steps: max_steps })
}

impl<T: Real> BaProfile<T> {
    pub fn last(&self) -> &ProfilePoint<T> {
        self.points.last().expect("profile always holds the apex")
    }

    /// Tangent angle where the profile crosses depth `z`, linearly interpolated in z.
    /// `None` if the profile never gets that deep.
    pub fn phi_at_depth(&self, z: T) -> Option<T> {
        self.interp_at_depth(z, |p| p.phi)
    }

    /// Radius of the profile at depth `z`; single valued because z increases along s.
    pub fn x_at_depth(&self, z: T) -> Option<T> {
        self.interp_at_depth(z, |p| p.x)
    }

    fn interp_at_depth(&self, z: T, f: impl Fn(&ProfilePoint<T>) -> T) -> Option<T> {
        if z < T::zero() || z > self.last().z {
            return None;
        }
        // First sample at or below the requested depth.
        let i = self.points.partition_point(|p| p.z < z);
        if i == 0 {
            return Some(f(&self.points[0]));
        }
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        let dz = b.z - a.z;
        let w = if dz > T::zero() { (z - a.z) / dz } else { T::zero() };
        Some(f(a) + w * (f(b) - f(a)))
    }

    /// Contact depth at which the profile tangent reaches `theta_deg`.
    pub fn depth_at_angle(&self, theta_deg: T) -> Option<T> {
        let theta = theta_deg.to_radians();
        let i = self.points.partition_point(|p| p.phi < theta);
        if i == 0 || i >= self.points.len() {
            return None;
        }
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        let w = (theta - a.phi) / (b.phi - a.phi);
        Some(a.z + w * (b.z - a.z))
    }

    /// Radius at the point where the tangent reaches `theta_deg`.
    pub fn radius_at_angle(&self, theta_deg: T) -> Option<T> {
        let theta = theta_deg.to_radians();
        let i = self.points.partition_point(|p| p.phi < theta);
        if i == 0 || i >= self.points.len() {
            return None;
        }
        let (a, b) = (&self.points[i - 1], &self.points[i]);
        let w = (theta - a.phi) / (b.phi - a.phi);
        Some(a.x + w * (b.x - a.x))
    }

    /// Widest radius reached on `[0, z_max]`.
    pub fn max_radius_above(&self, z_max: T) -> T {
        self.points.iter().take_while(|p| p.z <= z_max).fold(T::zero(), |m, p| m.max(p.x))
    }
}
