use std::collections::BTreeSet;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{render_droplet, LabError, RenderParams, ResponseModel};
use crate::formulation::{Formulation, SlotId, StageLayout, StageMap};
use crate::imaging::{measure_contact_angle, GrayImage, MeasureParams, QualityFlag};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentMode {
    /// Angles drawn directly from the response model plus replicate noise.
    #[default]
    Numeric,
    /// Each replicate is rendered as a photograph and measured by the imaging pipeline.
    Photorealistic,
}

/// Synthetic camera setup for photorealistic runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraConfig {
    pub bond_number: f64,
    pub pixel_noise: f64,
    pub reflection_contrast: f64,
    pub tilt_deg: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self { bond_number: 0.2, pixel_noise: 2.0, reflection_contrast: 0.7, tilt_deg: 0.0 }
    }
}

impl CameraConfig {
    pub fn scene(&self, theta_deg: f64) -> Result<RenderParams, LabError> {
        let mut rp = RenderParams::framed(theta_deg, self.bond_number)?;
        rp.noise_sigma = self.pixel_noise;
        rp.reflection_contrast = self.reflection_contrast;
        rp.tilt_deg = self.tilt_deg;
        Ok(rp)
    }
}

/// One measured drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateMeasurement {
    pub replicate: usize,
    pub slot: SlotId,
    /// Angle the drop actually had: model response, replicate scatter and stage bias.
    pub drop_theta_deg: f64,
    pub angle_deg: f64,
    /// Fit residual of the photograph; zero in numeric mode.
    pub rmse_px: f64,
    pub bond_number: f64,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<QualityFlag>,
}

/// Stand-in for the liquid handler, stage and camera.
#[derive(Debug, Clone)]
pub struct VirtualLab {
    pub model: ResponseModel,
    pub mode: ExperimentMode,
    pub camera: CameraConfig,
    pub measure: MeasureParams,
    stage: StageMap,
}

impl VirtualLab {
    pub fn new(model: ResponseModel, layout: StageLayout, mode: ExperimentMode) -> Result<Self, LabError> {
        model.validate()?;
        Ok(Self {
            model,
            mode,
            camera: CameraConfig::default(),
            measure: MeasureParams::default(),
            stage: StageMap::new(layout),
        })
    }

    pub fn stage(&self) -> &StageMap {
        &self.stage
    }

    /// Loads a fresh substrate: every stage slot becomes free.
    pub fn replace_substrate(&mut self) {
        self.stage.reset();
    }

    /// Uses up `n` free slots without measuring, as when restoring a logged run.
    pub fn occupy(&mut self, n: usize) -> Result<(), LabError> {
        if self.stage.free_slots() < n {
            return Err(crate::formulation::FormulationError::StageFull { capacity: self.stage.capacity() }.into());
        }
        for _ in 0..n {
            let slot = self.stage.allocate()?;
            self.stage.mark_spent(slot);
        }
        Ok(())
    }

    /// Prepares `f`, deposits `n` drops on free stage slots and measures each.
    pub fn run(
        &mut self,
        f: &Formulation,
        n: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<ReplicateMeasurement>, LabError> {
        if n == 0 {
            return Err(LabError::InvalidConfig("at least one replicate is required".into()));
        }
        let truth = self.model.theta(f)?;
        if self.stage.free_slots() < n {
            return Err(crate::formulation::FormulationError::StageFull { capacity: self.stage.capacity() }.into());
        }
        let scatter = Normal::new(0.0, self.model.noise_sd_deg).map_err(|e| LabError::InvalidConfig(e.to_string()))?;
        let mut out = Vec::with_capacity(n);
        for replicate in 0..n {
            let slot = self.stage.allocate()?;
            let drop_theta_deg = truth + self.model.level_bias(slot.level) + scatter.sample(rng);
            let m = match self.mode {
                ExperimentMode::Numeric => ReplicateMeasurement {
                    replicate,
                    slot,
                    drop_theta_deg,
                    angle_deg: drop_theta_deg,
                    rmse_px: 0.0,
                    bond_number: self.camera.bond_number,
                    flags: BTreeSet::new(),
                },
                ExperimentMode::Photorealistic => {
                    let img = self.photograph(drop_theta_deg, rng)?;
                    let r = measure_contact_angle(&img.into(), &self.measure)?;
                    ReplicateMeasurement {
                        replicate,
                        slot,
                        drop_theta_deg,
                        angle_deg: r.angle_deg,
                        rmse_px: r.rmse_px,
                        bond_number: r.bond_number,
                        flags: r.flags,
                    }
                }
            };
            self.stage.mark_spent(slot);
            out.push(m);
        }
        Ok(out)
    }

    /// Synthetic photograph of a drop with contact angle `theta_deg`.
    pub fn photograph(&self, theta_deg: f64, rng: &mut impl Rng) -> Result<GrayImage, LabError> {
        render_droplet(theta_deg, &self.camera.scene(theta_deg)?, rng)
    }
}

/// Runs one formulation with `n` replicates in the lab's configured mode.
pub fn run_virtual_experiment(
    lab: &mut VirtualLab,
    f: &Formulation,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ReplicateMeasurement>, LabError> {
    lab.run(f, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stage_fills_up() {
        let mut lab = VirtualLab::new(
            ResponseModel::calibrated(),
            StageLayout { levels: 1, positions: 4 },
            ExperimentMode::Numeric,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = Formulation::new().with("ethanol", 30.0);
        let a = lab.run(&f, 3, &mut rng).unwrap();
        assert_eq!(a.iter().map(|m| m.replicate).collect::<Vec<_>>(), [0, 1, 2]);
        assert!(matches!(lab.run(&f, 3, &mut rng), Err(LabError::Formulation(_))));
        assert_eq!(lab.stage().free_slots(), 1);
        lab.replace_substrate();
        assert_eq!(lab.run(&f, 3, &mut rng).unwrap()[0].slot, SlotId { level: 0, position: 0 });
    }

    #[test]
    fn zero_replicates_rejected() {
        let mut lab =
            VirtualLab::new(ResponseModel::calibrated(), StageLayout::default(), ExperimentMode::Numeric).unwrap();
        assert!(lab.run(&Formulation::new(), 0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
