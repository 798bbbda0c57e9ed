use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::OrchestratorError;

pub fn recommendation_topic(campaign_id: &str) -> String {
    format!("campaign/{campaign_id}/recommendation")
}

pub fn result_topic(campaign_id: &str) -> String {
    format!("campaign/{campaign_id}/result")
}

/// Failed experiments, answered instead of a result.
pub fn fault_topic(campaign_id: &str) -> String {
    format!("campaign/{campaign_id}/fault")
}

/// Orchestrator commands to the lab, such as a substrate change.
pub fn control_topic(campaign_id: &str) -> String {
    format!("campaign/{campaign_id}/control")
}

/// Publish/subscribe transport. Delivery is in order per topic; a message published to a
/// topic nobody subscribed to is dropped.
pub trait Broker {
    fn subscribe(&mut self, topic: &str) -> Result<(), OrchestratorError>;
    fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<(), OrchestratorError>;
    /// Next undelivered message on a subscribed topic.
    fn poll(&mut self, topic: &str) -> Result<Option<Vec<u8>>, OrchestratorError>;
}

/// Single-process broker backed by per-topic queues.
#[derive(Debug, Default, Clone)]
pub struct InProcessBus {
    subscribed: BTreeSet<String>,
    queues: BTreeMap<String, VecDeque<Vec<u8>>>,
    /// Publish each message twice, to exercise at-least-once handling.
    pub duplicate_delivery: bool,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pending(&self, topic: &str) -> usize {
        self.queues.get(topic).map_or(0, VecDeque::len)
    }
}

impl Broker for InProcessBus {
    fn subscribe(&mut self, topic: &str) -> Result<(), OrchestratorError> {
        self.subscribed.insert(topic.to_string());
        Ok(())
    }

    fn publish(&mut self, topic: &str, payload: &[u8]) -> Result<(), OrchestratorError> {
        if self.subscribed.contains(topic) {
            let q = self.queues.entry(topic.to_string()).or_default();
            q.push_back(payload.to_vec());
            if self.duplicate_delivery {
                q.push_back(payload.to_vec());
            }
        }
        Ok(())
    }

    fn poll(&mut self, topic: &str) -> Result<Option<Vec<u8>>, OrchestratorError> {
        if !self.subscribed.contains(topic) {
            return Err(OrchestratorError::Protocol(format!("not subscribed to `{topic}`")));
        }
        Ok(self.queues.get_mut(topic).and_then(VecDeque::pop_front))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn in_order_and_drop_without_subscriber() {
        let mut bus = InProcessBus::new();
        bus.publish("t", b"lost").unwrap();
        bus.subscribe("t").unwrap();
        bus.publish("t", b"a").unwrap();
        bus.publish("t", b"b").unwrap();
        assert_eq!(bus.poll("t").unwrap().as_deref(), Some(&b"a"[..]));
        assert_eq!(bus.poll("t").unwrap().as_deref(), Some(&b"b"[..]));
        assert_eq!(bus.poll("t").unwrap(), None);
        assert!(bus.poll("other").is_err());
        assert_eq!(recommendation_topic("x"), "campaign/x/recommendation");
    }
}
