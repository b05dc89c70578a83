//! File protocol for recommenders that run outside the harness.
//!
//! Requests (`requests.jsonl`):
//! `{"user":1,"history":[4,7,9],"k":5,"mode":"full"}`
//!
//! Responses (`recommendations.jsonl`):
//! `{"user":1,"run":1,"items":[5,2,9],"elapsed_s":0.01,"model":"caser"}`

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AdapterError, RecommendationRun, RunSource};
use crate::dataset::{SequenceMode, UserSequence};
use crate::extraction::{validate_ids, ExtractedList};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeRequest {
    pub user: u32,
    pub history: Vec<u32>,
    pub k: usize,
    pub mode: SequenceMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExchangeResponse {
    pub user: u32,
    pub run: u32,
    pub items: Vec<u64>,
    pub elapsed_s: f64,
    pub model: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedRun {
    pub model: String,
    pub run: RecommendationRun,
    pub extracted: ExtractedList,
}

/// Writes one request per sequence, sorted by user id. `eval_set` is written
/// as given; few-shot trimming is the caller's job.
pub fn export_requests(
    eval_set: &[UserSequence],
    k: usize,
    mode: SequenceMode,
    path: &Path,
) -> Result<usize, AdapterError> {
    if eval_set.is_empty() {
        return Err(AdapterError::EmptyEvalSet);
    }
    let io_err = |source| AdapterError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut sorted: Vec<&UserSequence> = eval_set.iter().collect();
    sorted.sort_by_key(|s| s.user_id);

    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    for seq in &sorted {
        let line = ExchangeRequest {
            user: seq.user_id,
            history: seq.history.clone(),
            k,
            mode,
        };
        serde_json::to_writer(&mut out, &line).map_err(|e| io_err(e.into()))?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    Ok(sorted.len())
}

/// Reads an exchange response file, validating each list against `[1, N]`
/// and truncating to `k`. Duplicate (model, user, run) triples are rejected.
pub fn import_recommendations(path: &Path, universe_size: u32, k: usize) -> Result<Vec<ImportedRun>, AdapterError> {
    let file = File::open(path).map_err(|source| AdapterError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let malformed = |line: usize, reason: String| AdapterError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };

    let mut seen = HashSet::new();
    let mut runs = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|source| AdapterError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let resp: ExchangeResponse = serde_json::from_str(&line).map_err(|e| malformed(lineno, e.to_string()))?;
        if !(resp.elapsed_s.is_finite() && resp.elapsed_s >= 0.0) {
            return Err(malformed(
                lineno,
                format!("elapsed_s {} is not a non-negative number", resp.elapsed_s),
            ));
        }
        if resp.user == 0 || resp.run == 0 {
            return Err(malformed(lineno, "user and run must be positive".into()));
        }
        if !seen.insert((resp.model.clone(), resp.user, resp.run)) {
            return Err(malformed(
                lineno,
                format!(
                    "duplicate entry for model {} user {} run {}",
                    resp.model, resp.user, resp.run
                ),
            ));
        }
        let extracted = validate_ids(resp.items.iter().copied(), universe_size, k, resp.user, resp.run);
        if !extracted.hallucinated.is_empty() {
            log::debug!(
                "{}:{lineno}: dropped out-of-universe ids {:?}",
                path.display(),
                extracted.hallucinated
            );
        }
        runs.push(ImportedRun {
            model: resp.model,
            run: RecommendationRun {
                user_id: resp.user,
                run_index: resp.run,
                source: RunSource::External,
                raw_text: String::new(),
                item_ids: resp.items,
                elapsed_seconds: resp.elapsed_s,
                failure: None,
            },
            extracted,
        });
    }
    Ok(runs)
}
