use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aggregate_replicates, BrokeredService, CampaignConfig, ExperimentService, FaultMsg, InProcessBus,
    OrchestratorError, RecommendationMsg, ResultMsg, ServiceError, VirtualLabService,
};
use crate::formulation::Formulation;
use crate::optimizer::{CampaignRecord, CampaignStatus, OptimizerError};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const HISTORY_FILE: &str = "history.csv";
pub const RECORD_FILE: &str = "record.json";
pub const CONFIG_FILE: &str = "config.json";

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// RNG for the optimizer's choice of experiment `experiment_id`.
pub fn recommendation_rng(seed: u64, experiment_id: u64) -> ChaCha8Rng {
    stream_rng(seed, 2 * experiment_id)
}

/// RNG for the lab's replicate noise in experiment `experiment_id`.
pub fn lab_rng(seed: u64, experiment_id: u64) -> ChaCha8Rng {
    stream_rng(seed, 2 * experiment_id + 1)
}

/// One line of `events.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CampaignEvent {
    Started { campaign_id: String, seed: u64, budget: usize },
    Recommendation(RecommendationMsg),
    Result(ResultMsg),
    Fault(FaultMsg),
    SubstrateReplaced { experiment_id: u64 },
    Finished { status: CampaignStatus, experiments: usize },
}

/// How the orchestrator reaches the virtual lab.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabLink {
    /// Direct calls.
    #[default]
    Virtual,
    /// Encoded messages over the in-process broker.
    Broker,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Overrides the configured budget.
    pub budget: Option<usize>,
    /// Directory for the event log, history and final record; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Continue from an existing event log in `out_dir`.
    pub resume: bool,
    /// Stop without finishing once this many results are recorded, as if killed.
    pub halt_after: Option<usize>,
    /// Consecutive lab faults tolerated before the campaign aborts.
    pub max_consecutive_faults: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { budget: None, out_dir: None, resume: false, halt_after: None, max_consecutive_faults: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: CampaignRecord,
    pub events: Vec<CampaignEvent>,
    /// False when halted before the budget was spent.
    pub finished: bool,
}

impl RunOutcome {
    pub fn faults(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, CampaignEvent::Fault(f) if !f.stage_full)).count()
    }

    pub fn substrate_changes(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, CampaignEvent::SubstrateReplaced { .. })).count()
    }
}

struct EventLog {
    file: Option<File>,
    events: Vec<CampaignEvent>,
}

impl EventLog {
    fn push(&mut self, e: CampaignEvent) -> Result<(), OrchestratorError> {
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_vec(&e)?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.flush()?;
        }
        self.events.push(e);
        Ok(())
    }
}

/// Reads an event log. A final line without its newline is an interrupted write and is
/// ignored.
pub fn read_events(path: &Path) -> Result<Vec<CampaignEvent>, OrchestratorError> {
    let text = std::fs::read_to_string(path)?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(OrchestratorError::from))
        .collect()
}

/// Length in bytes of the complete lines of a log.
fn complete_len(path: &Path) -> Result<u64, OrchestratorError> {
    let mut r = BufReader::new(File::open(path)?);
    let (mut len, mut buf) = (0u64, Vec::new());
    loop {
        buf.clear();
        let n = r.read_until(b'\n', &mut buf)?;
        if n == 0 || buf.last() != Some(&b'\n') {
            return Ok(len);
        }
        len += n as u64;
    }
}

/// Loop state rebuilt from the log.
#[derive(Default)]
struct Cursor {
    next_id: u64,
    /// Recommended but unanswered.
    open: Option<RecommendationMsg>,
    /// Formulation to re-issue after a stage-full fault.
    retry: Option<Formulation>,
    needs_substrate: bool,
    finished: bool,
}

fn replay(
    events: &[CampaignEvent],
    record: &mut CampaignRecord,
    service: &mut impl ExperimentService,
    seed: u64,
) -> Result<Cursor, OrchestratorError> {
    let mismatch = |m: String| OrchestratorError::ReplayMismatch(m);
    let mut c = Cursor { next_id: 1, ..Cursor::default() };
    match events.first() {
        Some(CampaignEvent::Started { campaign_id, seed: s, .. }) if *campaign_id == record.id && *s == seed => {}
        Some(_) => return Err(mismatch("log was started by another campaign or seed".into())),
        None => return Ok(c),
    }
    for e in &events[1..] {
        match e {
            CampaignEvent::Started { .. } => return Err(mismatch("second start event".into())),
            CampaignEvent::Recommendation(rec) => {
                if rec.experiment_id != c.next_id || c.open.is_some() {
                    return Err(mismatch(format!("unexpected recommendation {}", rec.experiment_id)));
                }
                let idx = record
                    .space
                    .index_of(&rec.formulation())
                    .ok_or_else(|| mismatch("formulation outside the space".into()))?;
                record.pending = Some(idx);
                c.next_id += 1;
                c.retry = None;
                c.open = Some(rec.clone());
            }
            CampaignEvent::Result(res) => {
                let rec = c.open.take().filter(|r| r.experiment_id == res.experiment_id);
                let rec =
                    rec.ok_or_else(|| mismatch(format!("result for unknown experiment {}", res.experiment_id)))?;
                record.record_result(&rec.formulation(), &res.angles_deg)?;
                service.replay(&rec, res);
            }
            CampaignEvent::Fault(f) => {
                let rec = c.open.take().filter(|r| r.experiment_id == f.experiment_id);
                let rec = rec.ok_or_else(|| mismatch(format!("fault for unknown experiment {}", f.experiment_id)))?;
                record.cancel_pending();
                if f.stage_full {
                    c.retry = Some(rec.formulation());
                    c.needs_substrate = true;
                }
            }
            CampaignEvent::SubstrateReplaced { .. } => {
                service.replace_substrate();
                c.needs_substrate = false;
            }
            CampaignEvent::Finished { status, .. } => {
                record.status = *status;
                c.finished = true;
            }
        }
    }
    Ok(c)
}

/// Runs the recommend / execute / record loop until the budget is spent or the space is
/// exhausted. See [`run_campaign_until`].
pub fn run_campaign(
    config: &CampaignConfig,
    seed: u64,
    service: &mut impl ExperimentService,
    opts: &RunOptions,
) -> Result<RunOutcome, OrchestratorError> {
    run_campaign_until(config, seed, service, opts, |_| false)
}

/// [`run_campaign`] that also stops, finished, as soon as `stop` holds for the record.
pub fn run_campaign_until(
    config: &CampaignConfig,
    seed: u64,
    service: &mut impl ExperimentService,
    opts: &RunOptions,
    mut stop: impl FnMut(&CampaignRecord) -> bool,
) -> Result<RunOutcome, OrchestratorError> {
    config.validate()?;
    let mut record = config.record(seed)?;
    let budget = opts.budget.map_or(config.budget_or_grid()?, |b| b.min(record.space.len()));
    if budget == 0 {
        return Err(OrchestratorError::ConfigInvalid("budget must be at least 1".into()));
    }

    let events_path = opts.out_dir.as_ref().map(|d| d.join(EVENTS_FILE));
    if let Some(d) = &opts.out_dir {
        std::fs::create_dir_all(d)?;
    }
    let mut cursor = Cursor { next_id: 1, ..Cursor::default() };
    let mut log = EventLog { file: None, events: Vec::new() };
    let resuming = opts.resume && events_path.as_ref().is_some_and(|p| p.exists());
    if let Some(p) = &events_path {
        if resuming {
            let events = read_events(p)?;
            cursor = replay(&events, &mut record, service, seed)?;
            let f = OpenOptions::new().write(true).open(p)?;
            f.set_len(complete_len(p)?)?;
            drop(f);
            log.events = events;
        }
        log.file = Some(OpenOptions::new().create(true).append(true).truncate(false).open(p)?);
        if !resuming {
            log.file.as_ref().expect("just opened").set_len(0)?;
        }
    }
    if log.events.is_empty() {
        log.push(CampaignEvent::Started { campaign_id: record.id.clone(), seed, budget })?;
    }

    let mut consecutive_faults = 0;
    let mut consecutive_full = 0;
    let mut finished = cursor.finished;
    while !finished {
        if record.history.len() >= budget || stop(&record) {
            if record.status == CampaignStatus::Running {
                record.status = CampaignStatus::Completed;
            }
            break;
        }
        if opts.halt_after.is_some_and(|k| record.history.len() >= k) {
            return Ok(RunOutcome { record, events: log.events, finished: false });
        }
        if cursor.needs_substrate {
            service.replace_substrate();
            log.push(CampaignEvent::SubstrateReplaced { experiment_id: cursor.next_id - 1 })?;
            cursor.needs_substrate = false;
        }
        let rec = match cursor.open.take() {
            Some(rec) => rec,
            None => {
                let f = match cursor.retry.take() {
                    Some(f) => {
                        record.pending = record.space.index_of(&f);
                        f
                    }
                    None => match record.recommend_next(&mut recommendation_rng(seed, cursor.next_id)) {
                        Ok(f) => f,
                        Err(OptimizerError::SpaceExhausted) => break,
                        Err(e) => return Err(e.into()),
                    },
                };
                let rec = RecommendationMsg {
                    campaign_id: record.id.clone(),
                    experiment_id: cursor.next_id,
                    formulation: f.as_map().clone(),
                    replicates: config.replicates,
                };
                cursor.next_id += 1;
                log.push(CampaignEvent::Recommendation(rec.clone()))?;
                rec
            }
        };
        match service.execute(&rec) {
            Ok(res) => {
                if res.experiment_id != rec.experiment_id
                    || res.campaign_id != rec.campaign_id
                    || res.replicates != rec.replicates
                {
                    return Err(OrchestratorError::Protocol(format!(
                        "result does not answer experiment {}",
                        rec.experiment_id
                    )));
                }
                record.record_result(&rec.formulation(), &res.angles_deg)?;
                log.push(CampaignEvent::Result(res))?;
                consecutive_faults = 0;
                consecutive_full = 0;
            }
            Err(ServiceError::StageFull) => {
                consecutive_full += 1;
                if consecutive_full > 1 {
                    return Err(OrchestratorError::ConfigInvalid("replicates do not fit on an empty stage".into()));
                }
                record.cancel_pending();
                log.push(CampaignEvent::Fault(FaultMsg {
                    campaign_id: rec.campaign_id.clone(),
                    experiment_id: rec.experiment_id,
                    stage_full: true,
                    reason: "stage full".into(),
                }))?;
                cursor.retry = Some(rec.formulation());
                cursor.needs_substrate = true;
            }
            Err(ServiceError::Fault(reason)) => {
                record.cancel_pending();
                log.push(CampaignEvent::Fault(FaultMsg {
                    campaign_id: rec.campaign_id.clone(),
                    experiment_id: rec.experiment_id,
                    stage_full: false,
                    reason: reason.clone(),
                }))?;
                consecutive_faults += 1;
                if consecutive_faults >= opts.max_consecutive_faults {
                    return Err(OrchestratorError::LabFault { experiment_id: rec.experiment_id, reason });
                }
            }
        }
        finished = record.status == CampaignStatus::Exhausted;
    }
    if !cursor.finished {
        log.push(CampaignEvent::Finished { status: record.status, experiments: record.history.len() })?;
    }
    if let Some(d) = &opts.out_dir {
        write_history_csv(&d.join(HISTORY_FILE), &record)?;
        std::fs::write(d.join(RECORD_FILE), serde_json::to_string_pretty(&record)?)?;
        std::fs::write(d.join(CONFIG_FILE), serde_json::to_string_pretty(config)?)?;
    }
    Ok(RunOutcome { record, events: log.events, finished: true })
}

/// Runs `config` against a fresh virtual lab reached through `link`.
pub fn run_virtual_campaign(
    config: &CampaignConfig,
    seed: u64,
    link: LabLink,
    opts: &RunOptions,
) -> Result<RunOutcome, OrchestratorError> {
    let service = VirtualLabService::new(config.lab.virtual_lab()?, config.deck(), config.lab.timing, seed);
    match link {
        LabLink::Virtual => run_campaign(config, seed, &mut { service }, opts),
        LabLink::Broker => {
            let mut s = BrokeredService::new(service, InProcessBus::new(), config.id.clone())?;
            run_campaign(config, seed, &mut s, opts)
        }
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// `iteration, <parameters>, mean_deg, sd_deg, t_<target>..., desirability`, one row per
/// recorded experiment.
pub fn write_history_csv(path: &Path, record: &CampaignRecord) -> Result<(), OrchestratorError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["iteration".to_string()];
    header.extend(record.space.parameters().iter().map(|p| p.name.clone()));
    header.extend(["mean_deg".to_string(), "sd_deg".to_string()]);
    header.extend(record.targets.iter().map(|t| format!("t_{}", t.name)));
    header.push("desirability".into());
    w.write_record(&header)?;
    for h in &record.history {
        let (mean, sd) = aggregate_replicates(&h.measurements)?;
        let mut row = vec![h.iteration.to_string()];
        row.extend(record.space.parameters().iter().map(|p| num(h.formulation.get(&p.name))));
        row.extend([num(mean), num(sd)]);
        row.extend(h.normalized.iter().map(|&t| num(t)));
        row.push(num(h.desirability));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
