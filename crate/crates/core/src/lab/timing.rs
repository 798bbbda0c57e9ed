use serde::{Deserialize, Serialize};

use super::LabError;

/// Durations of the robot and camera steps, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingModel {
    /// Mixing one formulation.
    pub mix_s: f64,
    /// Depositing one drop.
    pub deposit_s: f64,
    /// Moving the camera to a stage slot.
    pub camera_move_s: f64,
    pub capture_s: f64,
    /// Image analysis per replicate; runs while the robot prepares the next formulation.
    pub analyze_s: f64,
}

impl Default for TimingModel {
    /// 30 formulations in triplicate take about 91 minutes.
    fn default() -> Self {
        Self { mix_s: 60.0, deposit_s: 25.0, camera_move_s: 8.0, capture_s: 7.0, analyze_s: 20.0 }
    }
}

impl TimingModel {
    pub fn validate(&self) -> Result<(), LabError> {
        let handling = [self.mix_s, self.deposit_s, self.camera_move_s, self.capture_s];
        if handling.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(LabError::InvalidConfig("handling durations must be positive".into()));
        }
        if !(self.analyze_s >= 0.0 && self.analyze_s.is_finite()) {
            return Err(LabError::InvalidConfig("analysis duration must be non-negative".into()));
        }
        Ok(())
    }

    /// Robot time to prepare and image one formulation.
    pub fn handling_s(&self, replicates: usize) -> f64 {
        self.mix_s + replicates as f64 * (self.deposit_s + self.camera_move_s + self.capture_s)
    }

    pub fn analysis_s(&self, replicates: usize) -> f64 {
        replicates as f64 * self.analyze_s
    }
}

/// Wall time for `experiments` formulations of `replicates` drops each. Analysis of one
/// formulation overlaps preparation of the next, so each stage after the first costs the
/// longer of the two; the last analysis runs alone.
pub fn simulate_throughput(tm: &TimingModel, experiments: usize, replicates: usize) -> f64 {
    if experiments == 0 {
        return 0.0;
    }
    let handling = tm.handling_s(replicates);
    let analysis = tm.analysis_s(replicates);
    handling + (experiments - 1) as f64 * handling.max(analysis) + analysis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_hidden_behind_handling() {
        let tm = TimingModel::default();
        assert_eq!(simulate_throughput(&tm, 2, 3), 2.0 * 180.0 + 60.0);
        assert_eq!(simulate_throughput(&tm, 0, 3), 0.0);
    }

    #[test]
    fn slow_analysis_dominates() {
        let tm = TimingModel { analyze_s: 100.0, ..TimingModel::default() };
        assert_eq!(simulate_throughput(&tm, 3, 3), 180.0 + 2.0 * 300.0 + 300.0);
    }

    #[test]
    fn validation() {
        assert!(TimingModel::default().validate().is_ok());
        assert!(TimingModel { analyze_s: 0.0, ..Default::default() }.validate().is_ok());
        assert!(TimingModel { mix_s: 0.0, ..Default::default() }.validate().is_err());
    }
}
