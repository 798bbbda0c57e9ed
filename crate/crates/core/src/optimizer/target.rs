use serde::{Deserialize, Serialize};

use super::OptimizerError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetMode {
    /// Hit a target value.
    Match,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Transformation {
    Triangular,
    Bell,
    Linear,
}

/// Default drop of the bell transformation: 0.5 at this fraction of the bound half-width.
pub const BELL_HALF_VALUE_FRACTION: f64 = 0.5;

/// Metric the target is computed from.
pub const CONTACT_ANGLE: &str = "contact_angle";
pub const TOTAL_SURFACTANT: &str = "total_surfactant";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSpec {
    pub name: String,
    pub mode: TargetMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub bounds: [f64; 2],
    pub transformation: Transformation,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default = "bell_fraction")]
    pub bell_half_value: f64,
}

fn one() -> f64 {
    1.0
}

fn bell_fraction() -> f64 {
    BELL_HALF_VALUE_FRACTION
}

impl TargetSpec {
    pub fn matching(name: impl Into<String>, value: f64, bounds: [f64; 2], transformation: Transformation) -> Self {
        Self {
            name: name.into(),
            mode: TargetMode::Match,
            value: Some(value),
            bounds,
            transformation,
            weight: 1.0,
            bell_half_value: BELL_HALF_VALUE_FRACTION,
        }
    }

    pub fn minimize(name: impl Into<String>, bounds: [f64; 2]) -> Self {
        Self {
            name: name.into(),
            mode: TargetMode::Min,
            value: None,
            bounds,
            transformation: Transformation::Linear,
            weight: 1.0,
            bell_half_value: BELL_HALF_VALUE_FRACTION,
        }
    }

    pub fn maximize(name: impl Into<String>, bounds: [f64; 2]) -> Self {
        Self { mode: TargetMode::Max, ..Self::minimize(name, bounds) }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn validate(&self) -> Result<(), OptimizerError> {
        let err = |m: String| Err(OptimizerError::InvalidTarget(format!("`{}`: {m}", self.name)));
        let [lo, hi] = self.bounds;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return err(format!("bounds [{lo}, {hi}] must satisfy lower < upper"));
        }
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return err(format!("weight {} must be positive and finite", self.weight));
        }
        match (self.mode, self.transformation) {
            (TargetMode::Match, Transformation::Triangular | Transformation::Bell) => match self.value {
                Some(v) if v >= lo && v <= hi => {}
                Some(v) => return err(format!("target {v} outside bounds")),
                None => return err("match mode needs a value".into()),
            },
            (TargetMode::Min | TargetMode::Max, Transformation::Linear) => {}
            (m, t) => return err(format!("{m:?} mode does not support the {t:?} transformation")),
        }
        if self.transformation == Transformation::Bell && !(self.bell_half_value > 0.0) {
            return err("bell half-value fraction must be positive".into());
        }
        Ok(())
    }
}

/// Maps a raw value onto [0, 1]; out-of-bounds values are clamped.
pub fn normalize_target(y: f64, spec: &TargetSpec) -> f64 {
    let [lo, hi] = spec.bounds;
    let half = (hi - lo) / 2.0;
    let t = match (spec.mode, spec.transformation) {
        (TargetMode::Match, Transformation::Bell) => {
            let target = spec.value.unwrap_or((lo + hi) / 2.0);
            let u = (y - target) / (half * 2.0 * spec.bell_half_value);
            (-4.0 * std::f64::consts::LN_2 * u * u).exp()
        }
        (TargetMode::Match, _) => {
            let target = spec.value.unwrap_or((lo + hi) / 2.0);
            1.0 - (y - target).abs() / half
        }
        (TargetMode::Min, _) => (hi - y) / (hi - lo),
        (TargetMode::Max, _) => (y - lo) / (hi - lo),
    };
    if t.is_nan() {
        0.0
    } else {
        t.clamp(0.0, 1.0)
    }
}

/// Weighted geometric mean of normalized targets, (prod t_i^w_i)^(1 / sum w_i).
pub fn desirability(t: &[f64], w: &[f64]) -> Result<f64, OptimizerError> {
    if t.len() != w.len() {
        return Err(OptimizerError::LengthMismatch { targets: t.len(), weights: w.len() });
    }
    if t.is_empty() {
        return Err(OptimizerError::InvalidTarget("no targets".into()));
    }
    if let Some(&bad) = t.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(OptimizerError::InvalidTarget(format!("normalized value {bad} outside [0, 1]")));
    }
    if let Some(&bad) = w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(OptimizerError::InvalidTarget(format!("weight {bad} must be positive")));
    }
    if t.contains(&0.0) {
        return Ok(0.0);
    }
    let wsum: f64 = w.iter().sum();
    let prod: f64 = t.iter().zip(w).map(|(&ti, &wi)| ti.powf(wi)).product();
    Ok(prod.powf(1.0 / wsum).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transformations() {
        let tri = TargetSpec::matching("contact_angle", 72.0, [22.0, 122.0], Transformation::Triangular);
        assert_eq!(normalize_target(72.0, &tri), 1.0);
        assert_eq!(normalize_target(122.0, &tri), 0.0);
        assert_eq!(normalize_target(97.0, &tri), 0.5);
        assert_eq!(normalize_target(10.0, &tri), 0.0);

        let bell = TargetSpec { transformation: Transformation::Bell, ..tri };
        assert_eq!(normalize_target(72.0, &bell), 1.0);
        assert!((normalize_target(97.0, &bell) - 0.5).abs() < 1e-15);
        assert!((normalize_target(122.0, &bell) - 0.0625).abs() < 1e-12);

        let min = TargetSpec::minimize("total_surfactant", [0.08, 1.80]);
        assert_eq!(normalize_target(0.08, &min), 1.0);
        assert_eq!(normalize_target(1.80, &min), 0.0);
        let max = TargetSpec::maximize("x", [0.0, 2.0]);
        assert_eq!(normalize_target(1.5, &max), 0.75);
    }

    #[test]
    fn validation() {
        assert!(TargetSpec::matching("a", 5.0, [0.0, 1.0], Transformation::Bell).validate().is_err());
        assert!(TargetSpec::matching("a", 0.5, [1.0, 0.0], Transformation::Bell).validate().is_err());
        assert!(TargetSpec::minimize("a", [0.0, 1.0]).with_weight(0.0).validate().is_err());
        let mut t = TargetSpec::minimize("a", [0.0, 1.0]);
        t.transformation = Transformation::Bell;
        assert!(t.validate().is_err());
    }

    #[test]
    fn geometric_mean_cases() {
        assert_eq!(desirability(&[1.0, 1.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(desirability(&[0.81, 1.0], &[1.0, 1.0]).unwrap(), 0.9);
        assert_eq!(desirability(&[0.0, 0.7], &[1.0, 3.0]).unwrap(), 0.0);
        assert!((desirability(&[0.5, 1.0], &[2.0, 1.0]).unwrap() - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!(matches!(desirability(&[0.5], &[1.0, 1.0]), Err(OptimizerError::LengthMismatch { .. })));
    }
}
