use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_campaign_until, CampaignConfig, OrchestratorError, RunOptions, VirtualLabService};
use crate::optimizer::{CampaignRecord, HistoryEntry, TargetMode, CONTACT_ANGLE};

/// An "optimal formulation": desirability at least `min_desirability` and a replicate-mean
/// angle within `tolerance_deg` of `target_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalCriteria {
    pub min_desirability: f64,
    pub target_deg: f64,
    pub tolerance_deg: f64,
}

impl OptimalCriteria {
    /// D >= 0.90 and within two replicate SDs of the configured contact-angle target.
    pub fn from_config(config: &CampaignConfig) -> Result<Self, OrchestratorError> {
        let t = config
            .targets
            .iter()
            .find(|t| t.name == CONTACT_ANGLE && t.mode == TargetMode::Match)
            .and_then(|t| t.value)
            .ok_or_else(|| OrchestratorError::ConfigInvalid("comparison needs a contact-angle match target".into()))?;
        Ok(Self { min_desirability: 0.90, target_deg: t, tolerance_deg: 2.0 * config.lab.model.noise_sd_deg })
    }
}

#[derive(Debug, Clone, Default)]
pub struct CompareOptions {
    /// Experiments per campaign; the whole grid when absent.
    pub budget: Option<usize>,
    pub criteria: Option<OptimalCriteria>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareRow {
    pub seed: u64,
    /// Iteration of the first optimal formulation, if any was found within the budget.
    pub multi: Option<usize>,
    pub single: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub budget: usize,
    pub criteria: OptimalCriteria,
    pub rows: Vec<CompareRow>,
    pub median_multi: f64,
    pub median_single: f64,
}

/// Median first-optimal iteration; campaigns that never found one count as `budget + 1`.
pub fn median_first_optimal(firsts: &[Option<usize>], budget: usize) -> f64 {
    let mut v: Vec<usize> = firsts.iter().map(|f| f.unwrap_or(budget + 1)).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable();
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m] as f64
    } else {
        (v[m - 1] + v[m]) as f64 / 2.0
    }
}

struct Judge {
    reference: CampaignRecord,
    criteria: OptimalCriteria,
}

impl Judge {
    fn is_optimal(&self, h: &HistoryEntry) -> bool {
        let mean = h.mean_angle();
        (mean - self.criteria.target_deg).abs() <= self.criteria.tolerance_deg
            && self
                .reference
                .evaluate(&h.formulation, mean)
                .is_ok_and(|e| e.desirability >= self.criteria.min_desirability)
    }
}

/// Runs `config` for `seed` until the first optimal formulation or the budget.
fn first_optimal(
    config: &CampaignConfig,
    seed: u64,
    budget: usize,
    judge: &Judge,
) -> Result<Option<usize>, OrchestratorError> {
    let mut service = VirtualLabService::new(config.lab.virtual_lab()?, config.deck(), config.lab.timing, seed);
    let opts = RunOptions { budget: Some(budget), ..RunOptions::default() };
    let out = run_campaign_until(config, seed, &mut service, &opts, |r| {
        r.history.last().is_some_and(|h| judge.is_optimal(h))
    })?;
    Ok(out.record.history.iter().position(|h| judge.is_optimal(h)).map(|i| i + 1))
}

fn judge_and_budget(config: &CampaignConfig, opts: &CompareOptions) -> Result<(Judge, usize), OrchestratorError> {
    config.validate()?;
    let criteria = match opts.criteria {
        Some(c) => c,
        None => OptimalCriteria::from_config(config)?,
    };
    let n = config.search_space()?.len();
    let budget = opts.budget.or(config.budget).map_or(n, |b| b.min(n));
    Ok((Judge { reference: config.record(0)?, criteria }, budget))
}

/// Runs the configured multi-objective campaign and its contact-angle-only reduction on the
/// virtual lab for each seed. Optimality is always judged with the full objective.
pub fn compare_campaign_modes(
    config: &CampaignConfig,
    seeds: &[u64],
    opts: &CompareOptions,
) -> Result<CompareReport, OrchestratorError> {
    let (judge, budget) = judge_and_budget(config, opts)?;
    let single = config.single_objective()?;
    let rows = seeds
        .par_iter()
        .map(|&seed| {
            Ok(CompareRow {
                seed,
                multi: first_optimal(config, seed, budget, &judge)?,
                single: first_optimal(&single, seed, budget, &judge)?,
            })
        })
        .collect::<Result<Vec<_>, OrchestratorError>>()?;
    let multi: Vec<_> = rows.iter().map(|r| r.multi).collect();
    let single: Vec<_> = rows.iter().map(|r| r.single).collect();
    Ok(CompareReport {
        budget,
        criteria: judge.criteria,
        median_multi: median_first_optimal(&multi, budget),
        median_single: median_first_optimal(&single, budget),
        rows,
    })
}

/// Summary of one objective variant across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub label: String,
    pub runs: usize,
    pub found: usize,
    pub median_first_optimal: f64,
    pub first_optimal: Vec<Option<usize>>,
}

fn run_variants(
    base: &CampaignConfig,
    variants: Vec<(String, CampaignConfig)>,
    seeds: &[u64],
    opts: &CompareOptions,
) -> Result<Vec<VariantSummary>, OrchestratorError> {
    let (judge, budget) = judge_and_budget(base, opts)?;
    variants
        .into_iter()
        .map(|(label, cfg)| {
            cfg.validate()?;
            let firsts = seeds
                .par_iter()
                .map(|&s| first_optimal(&cfg, s, budget, &judge))
                .collect::<Result<Vec<_>, OrchestratorError>>()?;
            Ok(VariantSummary {
                label,
                runs: firsts.len(),
                found: firsts.iter().filter(|f| f.is_some()).count(),
                median_first_optimal: median_first_optimal(&firsts, budget),
                first_optimal: firsts,
            })
        })
        .collect()
}

/// Re-runs the campaign with each weight vector (in target order), judging optimality with
/// the base objective.
pub fn compare_weight_ratios(
    config: &CampaignConfig,
    ratios: &[Vec<f64>],
    seeds: &[u64],
    opts: &CompareOptions,
) -> Result<Vec<VariantSummary>, OrchestratorError> {
    let mut variants = Vec::new();
    for w in ratios {
        if w.len() != config.targets.len() {
            return Err(OrchestratorError::ConfigInvalid(format!(
                "{} weights for {} targets",
                w.len(),
                config.targets.len()
            )));
        }
        let mut c = config.clone();
        c.targets.iter_mut().zip(w).for_each(|(t, &wi)| t.weight = wi);
        let label = w.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(":");
        variants.push((label, c));
    }
    run_variants(config, variants, seeds, opts)
}

/// Re-runs the campaign with the contact-angle bounds set to `target +/- width`.
pub fn compare_bound_widths(
    config: &CampaignConfig,
    half_widths: &[f64],
    seeds: &[u64],
    opts: &CompareOptions,
) -> Result<Vec<VariantSummary>, OrchestratorError> {
    let target = OptimalCriteria::from_config(config)?.target_deg;
    let variants = half_widths
        .iter()
        .map(|&w| {
            let mut c = config.clone();
            for t in c.targets.iter_mut().filter(|t| t.name == CONTACT_ANGLE) {
                t.bounds = [target - w, target + w];
            }
            (format!("+/-{w}"), c)
        })
        .collect();
    run_variants(config, variants, seeds, opts)
}

fn cell(v: Option<usize>) -> String {
    v.map(|i| i.to_string()).unwrap_or_default()
}

/// `seed, multi_first_optimal, single_first_optimal`; empty cells mean none found.
pub fn write_compare_csv(path: &Path, report: &CompareReport) -> Result<(), OrchestratorError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["seed", "multi_first_optimal", "single_first_optimal"])?;
    for r in &report.rows {
        w.write_record([r.seed.to_string(), cell(r.multi), cell(r.single)])?;
    }
    w.flush()?;
    Ok(())
}

/// `variant, runs, found, median_first_optimal`.
pub fn write_variant_csv(path: &Path, rows: &[VariantSummary]) -> Result<(), OrchestratorError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variant", "runs", "found", "median_first_optimal"])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            r.runs.to_string(),
            r.found.to_string(),
            format!("{}", r.median_first_optimal),
        ])?;
    }
    w.flush()?;
    Ok(())
}
