use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::LabError;
use crate::formulation::{Formulation, DILUENT};

/// Contact angles the simulator can report.
pub const THETA_MIN_DEG: f64 = 5.0;
pub const THETA_MAX_DEG: f64 = 175.0;

/// Contribution of one component to the simulated wettability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentResponse {
    /// Solvent power law: theta(c) = theta_water - (theta_water - floor) * (c/100)^exponent.
    EthanolSolvent { floor_deg: f64, exponent: f64 },
    /// Saturating surface-pressure term added to cos(theta): A * (1 - exp(-c / c0)).
    SurfactantLangmuir { amplitude: f64, c0: f64 },
}

/// Simulated formulation to contact-angle response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseModel {
    pub theta_water_deg: f64,
    pub components: BTreeMap<String, ComponentResponse>,
    /// Exponent of the norm combining the solvent and total surfactant cosine shifts.
    #[serde(default = "default_coupling")]
    pub coupling_exponent: f64,
    #[serde(default = "default_noise")]
    pub noise_sd_deg: f64,
    /// Optional systematic offset per stage level, in degrees; empty means none.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub level_bias_deg: Vec<f64>,
}

fn default_coupling() -> f64 {
    4.0
}

fn default_noise() -> f64 {
    0.805
}

/// Solves the solvent power law through two (concentration, angle) anchors.
/// Returns `(floor_deg, exponent)`.
pub fn calibrate_solvent(theta_water_deg: f64, a: (f64, f64), b: (f64, f64)) -> Result<(f64, f64), LabError> {
    let da = theta_water_deg - a.1;
    let db = theta_water_deg - b.1;
    if !(da > 0.0 && db > 0.0 && a.0 > 0.0 && b.0 > 0.0 && a.0 <= 100.0 && b.0 <= 100.0) || a.0 == b.0 {
        return Err(LabError::InvalidConfig("solvent anchors must lower the angle at distinct concentrations".into()));
    }
    let exponent = (da / db).ln() / (a.0 / b.0).ln();
    if !(exponent > 0.0) {
        return Err(LabError::InvalidConfig("solvent anchors are not monotone".into()));
    }
    let span = da / (a.0 / 100.0).powf(exponent);
    Ok((theta_water_deg - span, exponent))
}

impl ResponseModel {
    /// Water at 104 deg, ethanol through 32 deg at 99.6% and 87.5 deg at 32.5%, and three
    /// surfactants with saturation plateaus near 86 (SDS94) and 72 deg (SDS99).
    pub fn calibrated() -> Self {
        let theta_water_deg = 104.0;
        let (floor_deg, exponent) =
            calibrate_solvent(theta_water_deg, (99.6, 32.0), (32.5, 87.5)).expect("anchors are valid");
        let mut components = BTreeMap::new();
        components.insert("ethanol".into(), ComponentResponse::EthanolSolvent { floor_deg, exponent });
        components.insert("SDS94".into(), ComponentResponse::SurfactantLangmuir { amplitude: 0.3117, c0: 0.015 });
        components.insert("SDS99".into(), ComponentResponse::SurfactantLangmuir { amplitude: 0.5509, c0: 0.09 });
        components.insert("Tween20".into(), ComponentResponse::SurfactantLangmuir { amplitude: 0.2475, c0: 0.03 });
        Self {
            theta_water_deg,
            components,
            coupling_exponent: default_coupling(),
            noise_sd_deg: default_noise(),
            level_bias_deg: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: &str| Err(LabError::InvalidConfig(m.into()));
        if !(self.theta_water_deg > THETA_MIN_DEG && self.theta_water_deg < THETA_MAX_DEG) {
            return bad("theta_water_deg outside (5, 175)");
        }
        if !(self.coupling_exponent >= 1.0) {
            return bad("coupling_exponent must be >= 1");
        }
        if !(self.noise_sd_deg >= 0.0) {
            return bad("noise_sd_deg must be >= 0");
        }
        for (name, c) in &self.components {
            let ok = match *c {
                ComponentResponse::EthanolSolvent { floor_deg, exponent } => {
                    exponent > 0.0 && floor_deg < self.theta_water_deg
                }
                ComponentResponse::SurfactantLangmuir { amplitude, c0 } => amplitude >= 0.0 && c0 > 0.0,
            };
            if !ok {
                return Err(LabError::InvalidConfig(format!("component `{name}` would not lower the angle")));
            }
        }
        Ok(())
    }

    /// Noise-free contact angle of `f`.
    pub fn theta(&self, f: &Formulation) -> Result<f64, LabError> {
        let cos_w = self.theta_water_deg.to_radians().cos();
        let (mut solvent, mut surfactant) = (0.0, 0.0);
        for (name, c) in f.components() {
            if name == DILUENT {
                continue;
            }
            let model = self.components.get(name).ok_or_else(|| LabError::UnknownComponent(name.to_string()))?;
            let c = c.max(0.0);
            match *model {
                ComponentResponse::EthanolSolvent { floor_deg, exponent } => {
                    let frac = (c / 100.0).min(1.0);
                    let theta = self.theta_water_deg - (self.theta_water_deg - floor_deg) * frac.powf(exponent);
                    solvent += theta.to_radians().cos() - cos_w;
                }
                ComponentResponse::SurfactantLangmuir { amplitude, c0 } => {
                    surfactant += amplitude * (1.0 - (-c / c0).exp());
                }
            }
        }
        let n = self.coupling_exponent;
        let shift = (solvent.max(0.0).powf(n) + surfactant.powf(n)).powf(1.0 / n);
        let cos = (cos_w + shift).clamp(THETA_MAX_DEG.to_radians().cos(), THETA_MIN_DEG.to_radians().cos());
        Ok(cos.acos().to_degrees().clamp(THETA_MIN_DEG, THETA_MAX_DEG))
    }

    /// Systematic offset for a stage level, zero when no bias table is configured.
    pub fn level_bias(&self, level: usize) -> f64 {
        self.level_bias_deg.get(level).copied().unwrap_or(0.0)
    }
}

impl Default for ResponseModel {
    fn default() -> Self {
        Self::calibrated()
    }
}

/// Noise-free contact angle of `f` under `model`.
pub fn response_theta(model: &ResponseModel, f: &Formulation) -> Result<f64, LabError> {
    model.theta(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solvent_calibration() {
        let (floor, p) = calibrate_solvent(104.0, (99.6, 32.0), (32.5, 87.5)).unwrap();
        assert!((p - 1.3156).abs() < 1e-3, "{p}");
        assert!((floor - 31.62).abs() < 0.01, "{floor}");
        assert!(calibrate_solvent(104.0, (50.0, 110.0), (20.0, 90.0)).is_err());
    }

    #[test]
    fn water_passes_through() {
        let m = ResponseModel::calibrated();
        assert!((m.theta(&Formulation::new()).unwrap() - 104.0).abs() < 1e-9);
        assert!((m.theta(&Formulation::new().with("water", 100.0)).unwrap() - 104.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_component() {
        let m = ResponseModel::calibrated();
        assert_eq!(
            m.theta(&Formulation::new().with("glycerol", 5.0)),
            Err(LabError::UnknownComponent("glycerol".into()))
        );
    }

    #[test]
    fn serde_round_trip() {
        let m = ResponseModel::calibrated();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"kind\":\"surfactant_langmuir\""));
        let back: ResponseModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        back.validate().unwrap();
    }
}
