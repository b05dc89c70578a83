//! Accuracy, fairness, stability and efficiency metrics.
//!
//! Per-user values average over that user's runs; aggregates average over
//! users in ascending `user_id` order. A user contributes to a metric only if
//! at least one of their runs is defined for it (non-empty list, or a list
//! with at least one quality-defined item for ARQ/ARQV).

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dataset::ItemStatsTable;
use crate::extraction::ExtractedList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub repetitions: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 5, repetitions: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerUserObservation {
    pub user_id: u32,
    pub ground_truth: u32,
    /// Successful runs only, in run-index order.
    pub runs: Vec<ExtractedList>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("timing log is empty; ART needs at least one execution")]
    EmptyTimingLog,
    #[error("negative or non-finite elapsed time {0}")]
    InvalidElapsed(String),
}

/// Wall-clock cost of each successful execution.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingLog {
    pub entries: Vec<(String, f64)>,
}

impl TimingLog {
    pub fn push(&mut self, run_id: impl Into<String>, elapsed_seconds: f64) {
        self.entries.push((run_id.into(), elapsed_seconds));
    }

    pub fn count(&self) -> usize {
        self.entries.len()
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn rank_of(list: &ExtractedList, item: u32, k: usize) -> Option<usize> {
    list.items.iter().take(k).position(|&i| i == item).map(|p| p + 1)
}

pub fn recall_at_k(obs: &PerUserObservation, k: usize) -> Option<f64> {
    mean(obs.runs.iter().map(|run| {
        if rank_of(run, obs.ground_truth, k).is_some() {
            1.0
        } else {
            0.0
        }
    }))
}

/// Single relevant item, so the ideal DCG is 1 and DCG needs no normalization.
pub fn ndcg_at_k(obs: &PerUserObservation, k: usize) -> Option<f64> {
    mean(obs.runs.iter().map(|run| match rank_of(run, obs.ground_truth, k) {
        Some(rank) => 1.0 / ((rank + 1) as f64).log2(),
        None => 0.0,
    }))
}

/// Mean popularity of the valid items in one list; `None` for an empty list.
pub fn list_popularity(list: &ExtractedList, stats: &ItemStatsTable, k: usize) -> Option<f64> {
    mean(list.items.iter().take(k).map(|&i| stats.popularity(i) as f64))
}

/// Quality values of a list's items, skipping undefined ones.
fn list_qualities(list: &ExtractedList, stats: &ItemStatsTable, k: usize) -> (Vec<f64>, usize) {
    let mut skipped = 0;
    let qualities = list
        .items
        .iter()
        .take(k)
        .filter_map(|&i| {
            let q = stats.quality(i);
            if q.is_none() {
                skipped += 1;
            }
            q
        })
        .collect();
    (qualities, skipped)
}

pub fn list_quality(list: &ExtractedList, stats: &ItemStatsTable, k: usize) -> Option<f64> {
    mean(list_qualities(list, stats, k).0)
}

/// Population variance of item quality within one list.
pub fn list_quality_variance(list: &ExtractedList, stats: &ItemStatsTable, k: usize) -> Option<f64> {
    let (qs, _) = list_qualities(list, stats, k);
    let mu = mean(qs.iter().copied())?;
    mean(qs.iter().map(|q| (q - mu) * (q - mu)))
}

pub fn user_arp(obs: &PerUserObservation, stats: &ItemStatsTable, k: usize) -> Option<f64> {
    mean(obs.runs.iter().filter_map(|r| list_popularity(r, stats, k)))
}

pub fn user_arq(obs: &PerUserObservation, stats: &ItemStatsTable, k: usize) -> Option<f64> {
    mean(obs.runs.iter().filter_map(|r| list_quality(r, stats, k)))
}

pub fn user_arqv(obs: &PerUserObservation, stats: &ItemStatsTable, k: usize) -> Option<f64> {
    mean(obs.runs.iter().filter_map(|r| list_quality_variance(r, stats, k)))
}

/// Overlap of each run with the union of all other runs, normalized by
/// `T * K` where `T` is the number of runs and `K` the requested length.
/// A single run is defined as fully repeatable.
pub fn arr_at_k(obs: &PerUserObservation, k: usize) -> Option<f64> {
    let t = obs.runs.len();
    match t {
        0 => return None,
        1 => return Some(1.0),
        _ => {}
    }
    let sets: Vec<HashSet<u32>> = obs
        .runs
        .iter()
        .map(|r| r.items.iter().take(k).copied().collect())
        .collect();
    let repeated: usize = (0..t)
        .map(|n| {
            sets[n]
                .iter()
                .filter(|item| (0..t).any(|m| m != n && sets[m].contains(item)))
                .count()
        })
        .sum();
    Some(repeated as f64 / (t * k) as f64)
}

pub fn art(timings: &TimingLog) -> Result<f64, MetricsError> {
    if let Some((_, bad)) = timings.entries.iter().find(|(_, e)| !(e.is_finite() && *e >= 0.0)) {
        return Err(MetricsError::InvalidElapsed(bad.to_string()));
    }
    mean(timings.entries.iter().map(|(_, e)| *e)).ok_or(MetricsError::EmptyTimingLog)
}

/// Mean over users of a per-user statistic, skipping users where it is undefined.
fn aggregate<F>(observations: &[&PerUserObservation], per_user: F) -> (f64, usize)
where
    F: Fn(&PerUserObservation) -> Option<f64>,
{
    let values: Vec<f64> = observations.iter().filter_map(|o| per_user(o)).collect();
    (mean(values.iter().copied()).unwrap_or(0.0), values.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetricRow {
    pub user_id: u32,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
    pub arp: Option<f64>,
    pub arq: Option<f64>,
    pub arqv: Option<f64>,
    pub arr: Option<f64>,
}

pub fn per_user_rows(observations: &[PerUserObservation], stats: &ItemStatsTable, k: usize) -> Vec<UserMetricRow> {
    let mut sorted: Vec<&PerUserObservation> = observations.iter().collect();
    sorted.sort_by_key(|o| o.user_id);
    sorted
        .into_iter()
        .map(|o| UserMetricRow {
            user_id: o.user_id,
            recall: recall_at_k(o, k),
            ndcg: ndcg_at_k(o, k),
            arp: user_arp(o, stats, k),
            arq: user_arq(o, stats, k),
            arqv: user_arqv(o, stats, k),
            arr: arr_at_k(o, k),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub recall_at_k: f64,
    pub ndcg_at_k: f64,
    pub arp: f64,
    pub arq: f64,
    pub arqv: f64,
    pub arr: f64,
    pub art_seconds: f64,
    /// Users with at least one successful run.
    pub num_users: usize,
    /// Successful executions timed for ART.
    pub num_executions: usize,
    /// Executions that failed or produced no valid item.
    pub failures: usize,
    /// Users excluded from ARQ/ARQV because no run had a quality-defined item.
    pub quality_excluded_users: usize,
    /// Recommended items skipped by ARQ/ARQV for lacking a quality score.
    pub quality_skipped_items: usize,
}

/// Aggregates every metric. `observations` should hold successful runs only;
/// `failures` is carried through to the report.
pub fn evaluate(
    observations: &[PerUserObservation],
    stats: &ItemStatsTable,
    timings: &TimingLog,
    cfg: &EvalConfig,
    failures: usize,
) -> MetricReport {
    let k = cfg.k;
    let mut sorted: Vec<&PerUserObservation> = observations.iter().filter(|o| !o.runs.is_empty()).collect();
    sorted.sort_by_key(|o| o.user_id);

    let (recall, num_users) = aggregate(&sorted, |o| recall_at_k(o, k));
    let (ndcg, _) = aggregate(&sorted, |o| ndcg_at_k(o, k));
    let (arp, arp_users) = aggregate(&sorted, |o| user_arp(o, stats, k));
    let (arq, arq_users) = aggregate(&sorted, |o| user_arq(o, stats, k));
    let (arqv, _) = aggregate(&sorted, |o| user_arqv(o, stats, k));
    let (arr, _) = aggregate(&sorted, |o| arr_at_k(o, k));

    let empty_users = num_users - arp_users;
    if empty_users > 0 {
        log::warn!("{empty_users} users had only empty lists and were excluded from ARP");
    }
    let quality_skipped_items = sorted
        .iter()
        .flat_map(|o| o.runs.iter())
        .map(|r| list_qualities(r, stats, k).1)
        .sum();

    MetricReport {
        recall_at_k: recall,
        ndcg_at_k: ndcg,
        arp,
        arq,
        arqv,
        arr,
        art_seconds: art(timings).unwrap_or(0.0),
        num_users,
        num_executions: timings.count(),
        failures,
        quality_excluded_users: num_users - arq_users,
        quality_skipped_items,
    }
}
