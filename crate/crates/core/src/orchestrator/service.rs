use serde::{Deserialize, Serialize};

use super::runner::lab_rng;
use super::{
    control_topic, decode_msg, encode_msg, fault_topic, recommendation_topic, result_topic, Broker, FaultMsg,
    OrchestratorError, RecommendationMsg, ResultMsg,
};
use crate::formulation::{compute_working_volumes, DeckConfig, FormulationError};
use crate::lab::{LabError, TimingModel, VirtualLab};

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceError {
    /// Too few free stage slots for the requested replicates.
    StageFull,
    Fault(String),
}

/// The lab side of the loop: prepares and measures recommended formulations.
pub trait ExperimentService {
    fn execute(&mut self, rec: &RecommendationMsg) -> Result<ResultMsg, ServiceError>;
    fn replace_substrate(&mut self);
    /// Restores the side effects of a logged result (stage occupancy) when resuming.
    fn replay(&mut self, rec: &RecommendationMsg, res: &ResultMsg);
}

/// Virtual liquid handler, stage and camera. Replicate noise for experiment `k` comes from
/// its own RNG stream, so results do not depend on what ran before.
#[derive(Debug, Clone)]
pub struct VirtualLabService {
    pub lab: VirtualLab,
    pub deck: DeckConfig,
    pub timing: TimingModel,
    pub seed: u64,
}

impl VirtualLabService {
    pub fn new(lab: VirtualLab, deck: DeckConfig, timing: TimingModel, seed: u64) -> Self {
        Self { lab, deck, timing, seed }
    }

    /// Capture times of experiment `k`'s replicates when preparation and analysis overlap.
    fn timestamps(&self, experiment_id: u64, n: usize) -> Vec<f64> {
        let t = &self.timing;
        let cycle = t.handling_s(n).max(t.analysis_s(n));
        let start = (experiment_id.saturating_sub(1)) as f64 * cycle + t.mix_s;
        (1..=n).map(|i| start + i as f64 * (t.deposit_s + t.camera_move_s + t.capture_s)).collect()
    }
}

impl ExperimentService for VirtualLabService {
    fn execute(&mut self, rec: &RecommendationMsg) -> Result<ResultMsg, ServiceError> {
        let f = rec.formulation();
        compute_working_volumes(&f, &self.deck).map_err(|e| ServiceError::Fault(e.to_string()))?;
        if self.lab.stage().free_slots() < rec.replicates {
            return Err(ServiceError::StageFull);
        }
        let mut rng = lab_rng(self.seed, rec.experiment_id);
        let ms = self.lab.run(&f, rec.replicates, &mut rng).map_err(|e| match e {
            LabError::Formulation(FormulationError::StageFull { .. }) => ServiceError::StageFull,
            e => ServiceError::Fault(e.to_string()),
        })?;
        ResultMsg::new(
            rec.campaign_id.clone(),
            rec.experiment_id,
            ms.iter().map(|m| m.angle_deg).collect(),
            ms.iter().map(|m| m.rmse_px).collect(),
            self.timestamps(rec.experiment_id, rec.replicates),
        )
        .map_err(|e| ServiceError::Fault(e.to_string()))
    }

    fn replace_substrate(&mut self) {
        self.lab.replace_substrate();
    }

    fn replay(&mut self, rec: &RecommendationMsg, _res: &ResultMsg) {
        // A logged result was accepted, so its slots were free at the time.
        let _ = self.lab.occupy(rec.replicates);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ControlMsg {
    campaign_id: String,
    command: String,
}

const REPLACE_SUBSTRATE: &str = "replace_substrate";

/// Lab-side bus endpoint: answers each recommendation once with a result or a fault.
#[derive(Debug, Clone)]
pub struct LabWorker<S> {
    pub service: S,
    campaign_id: String,
    last_answered: u64,
}

impl<S: ExperimentService> LabWorker<S> {
    pub fn new(service: S, campaign_id: impl Into<String>) -> Self {
        Self { service, campaign_id: campaign_id.into(), last_answered: 0 }
    }

    pub fn subscribe(&self, bus: &mut impl Broker) -> Result<(), OrchestratorError> {
        bus.subscribe(&recommendation_topic(&self.campaign_id))?;
        bus.subscribe(&control_topic(&self.campaign_id))
    }

    /// Handles every queued control message and recommendation.
    pub fn pump(&mut self, bus: &mut impl Broker) -> Result<(), OrchestratorError> {
        while let Some(bytes) = bus.poll(&control_topic(&self.campaign_id))? {
            let c: ControlMsg = serde_json::from_slice(&bytes)?;
            if c.command == REPLACE_SUBSTRATE {
                self.service.replace_substrate();
            }
        }
        while let Some(bytes) = bus.poll(&recommendation_topic(&self.campaign_id))? {
            let rec: RecommendationMsg = decode_msg(&bytes)?;
            // At-least-once delivery: repeats of an answered experiment are dropped.
            if rec.experiment_id <= self.last_answered {
                continue;
            }
            self.last_answered = rec.experiment_id;
            match self.service.execute(&rec) {
                Ok(res) => bus.publish(&result_topic(&self.campaign_id), &encode_msg(&res)?)?,
                Err(e) => {
                    let (stage_full, reason) = match e {
                        ServiceError::StageFull => (true, "stage full".to_string()),
                        ServiceError::Fault(r) => (false, r),
                    };
                    let fault = FaultMsg {
                        campaign_id: rec.campaign_id.clone(),
                        experiment_id: rec.experiment_id,
                        stage_full,
                        reason,
                    };
                    bus.publish(&fault_topic(&self.campaign_id), &encode_msg(&fault)?)?;
                }
            }
        }
        Ok(())
    }
}

/// Orchestrator-side adapter that reaches the lab through a broker. The worker is pumped
/// in-process after each publish; with an external broker it would run remotely.
#[derive(Debug, Clone)]
pub struct BrokeredService<S, B> {
    pub bus: B,
    pub worker: LabWorker<S>,
    campaign_id: String,
}

impl<S: ExperimentService, B: Broker> BrokeredService<S, B> {
    pub fn new(service: S, mut bus: B, campaign_id: impl Into<String>) -> Result<Self, OrchestratorError> {
        let campaign_id = campaign_id.into();
        let worker = LabWorker::new(service, campaign_id.clone());
        worker.subscribe(&mut bus)?;
        bus.subscribe(&result_topic(&campaign_id))?;
        bus.subscribe(&fault_topic(&campaign_id))?;
        Ok(Self { bus, worker, campaign_id })
    }

    fn exchange(&mut self, rec: &RecommendationMsg) -> Result<Result<ResultMsg, ServiceError>, OrchestratorError> {
        self.bus.publish(&recommendation_topic(&self.campaign_id), &encode_msg(rec)?)?;
        self.worker.pump(&mut self.bus)?;
        let mut answer = None;
        while let Some(bytes) = self.bus.poll(&result_topic(&self.campaign_id))? {
            let res: ResultMsg = decode_msg(&bytes)?;
            if res.experiment_id == rec.experiment_id && answer.is_none() {
                answer = Some(Ok(res));
            }
        }
        while let Some(bytes) = self.bus.poll(&fault_topic(&self.campaign_id))? {
            let f: FaultMsg = decode_msg(&bytes)?;
            if f.experiment_id == rec.experiment_id && answer.is_none() {
                answer = Some(Err(if f.stage_full { ServiceError::StageFull } else { ServiceError::Fault(f.reason) }));
            }
        }
        answer.ok_or_else(|| OrchestratorError::Protocol(format!("no answer for experiment {}", rec.experiment_id)))
    }
}

impl<S: ExperimentService, B: Broker> ExperimentService for BrokeredService<S, B> {
    fn execute(&mut self, rec: &RecommendationMsg) -> Result<ResultMsg, ServiceError> {
        self.exchange(rec).unwrap_or_else(|e| Err(ServiceError::Fault(e.to_string())))
    }

    fn replace_substrate(&mut self) {
        let msg = ControlMsg { campaign_id: self.campaign_id.clone(), command: REPLACE_SUBSTRATE.into() };
        let sent = serde_json::to_vec(&msg)
            .map_err(OrchestratorError::from)
            .and_then(|b| self.bus.publish(&control_topic(&self.campaign_id), &b))
            .and_then(|_| self.worker.pump(&mut self.bus));
        debug_assert!(sent.is_ok(), "{sent:?}");
    }

    fn replay(&mut self, rec: &RecommendationMsg, res: &ResultMsg) {
        self.worker.last_answered = self.worker.last_answered.max(rec.experiment_id);
        self.worker.service.replay(rec, res);
    }
}
