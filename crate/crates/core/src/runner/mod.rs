//! Pipeline orchestration: ingest, split, query every model, persist, report.
//!
//! Every derived artifact (extracted lists, metrics, tables) is recomputed
//! from the persisted responses by [`regenerate_reports`], so `report` on an
//! existing run directory reproduces the original files byte for byte.

pub mod config;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{mpsc, Mutex};
use std::time::Instant;

pub use config::{validate_config, ConfigError, DatasetSource, ModelConfig, ModelSpec, RunConfig};

use crate::adapters::{
    builtin_recommend, derive_seed, export_requests, import_recommendations, AdapterError, BaselineKind, ChatClient,
    PopularityRanking, RecommendationRun, RunSource,
};
use crate::dataset::{
    build_eval_set, compute_item_stats, ingest, DatasetError, ItemStats, ItemStatsTable, SequenceMode, UserSequence,
};
use crate::extraction::{extract_and_validate, hallucination_rate, validate_ids};
use crate::metrics::{evaluate, per_user_rows, EvalConfig, PerUserObservation, TimingLog};
use crate::prompt::{template_checksums, PromptConfig, PromptEngine};
use crate::report::artifacts::{
    CellKey, DatasetInfo, ExtractedRecord, ResponseRecord, RunMeta, CONFIG_FILE, DATASET_FILE, EVAL_SET_FILE,
    EXTRACTED_FILE, ITEM_STATS_FILE, METRICS_FILE, PER_USER_FILE, RESPONSES_FILE, RUN_FILE, TEMPLATES_FILE,
};
use crate::report::{emit_report, ReportContext, ReportError, ReportRow, RunDir};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Inconsistent(String),
}

impl RunError {
    /// Errors that stem from the configuration rather than the run itself.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RunError::Config(_)
                | RunError::Adapter(AdapterError::MissingApiKey(_))
                | RunError::Adapter(AdapterError::KTooLarge { .. })
                | RunError::Adapter(AdapterError::ZeroK)
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub rows: Vec<ReportRow>,
    /// Prompts rendered across all LLM cells in this invocation.
    pub prompt_renders: usize,
}

/// Reads and validates a config file; relative paths resolve against its
/// directory.
pub fn load_config(path: &Path) -> Result<RunConfig, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(validate_config(&text, base)?)
}

fn jsonl_bytes<T: serde::Serialize>(rows: impl IntoIterator<Item = T>) -> Vec<u8> {
    let mut out = Vec::new();
    for row in rows {
        serde_json::to_writer(&mut out, &row).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn cells_for(cfg: &RunConfig) -> Vec<(CellKey, &ModelConfig)> {
    let mut cells = Vec::new();
    for m in &cfg.models {
        let (source, modes) = match &m.spec {
            ModelSpec::Llm(_) => (RunSource::Llm, cfg.sequence_modes.clone()),
            // Baselines ignore the history window, so one cell suffices.
            ModelSpec::Builtin { .. } => (RunSource::Builtin, vec![SequenceMode::Full]),
            ModelSpec::External { mode, .. } => (RunSource::External, vec![*mode]),
        };
        for mode in modes {
            cells.push((
                CellKey {
                    model: m.name.clone(),
                    mode,
                    source,
                },
                m,
            ));
        }
    }
    cells
}

pub fn run_benchmark(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    // Everything that can be rejected without touching the network.
    let mut clients: HashMap<&str, ChatClient> = HashMap::new();
    for m in &cfg.models {
        match &m.spec {
            ModelSpec::Llm(ep) => {
                clients.insert(&m.name, ChatClient::new(ep.clone())?);
            }
            ModelSpec::External { file, .. } if !file.is_file() => {
                return Err(ConfigError(format!(
                    "model {:?}: exchange file {} not found",
                    m.name,
                    file.display()
                ))
                .into());
            }
            _ => {}
        }
    }

    let spec = &cfg.dataset.spec;
    let dataset = ingest(spec, &cfg.dataset.path, cfg.dataset.format)?;
    if cfg.eval.k > dataset.universe_size as usize {
        return Err(AdapterError::KTooLarge {
            k: cfg.eval.k,
            universe_size: dataset.universe_size,
        }
        .into());
    }
    let mut eval_set = build_eval_set(&dataset, spec);
    let stats = compute_item_stats(&dataset, &eval_set, spec);
    let num_eval_users = eval_set.len();
    if let Some(n) = cfg.dataset.max_users {
        eval_set.truncate(n);
    }
    if eval_set.is_empty() {
        return Err(AdapterError::EmptyEvalSet.into());
    }
    log::info!(
        "{}: {} users evaluated, {} items, K={}, T={}",
        dataset.name,
        eval_set.len(),
        dataset.universe_size,
        cfg.eval.k,
        cfg.eval.repetitions
    );

    let dir = RunDir::new(&cfg.output_dir);
    std::fs::create_dir_all(dir.root()).map_err(|source| RunError::Io {
        path: dir.root().to_path_buf(),
        source,
    })?;
    dir.remove_manifest()?;

    let eval_bytes = jsonl_bytes(&eval_set);
    if dir.exists(EVAL_SET_FILE) && dir.read_bytes(EVAL_SET_FILE)? != eval_bytes {
        return Err(RunError::Inconsistent(format!(
            "{} already holds a different evaluation set; use a fresh output_dir",
            dir.root().display()
        )));
    }
    let previous: Option<RunMeta> = if dir.exists(RUN_FILE) {
        Some(dir.read_json(RUN_FILE)?)
    } else {
        None
    };

    dir.write_json(CONFIG_FILE, cfg)?;
    dir.write_json(TEMPLATES_FILE, &template_checksums())?;
    dir.write_json(
        DATASET_FILE,
        &DatasetInfo {
            name: dataset.name.clone(),
            universe_size: dataset.universe_size,
            num_users: dataset.num_users(),
            eval_users: num_eval_users,
            summary: dataset.summary,
        },
    )?;
    dir.write_bytes(EVAL_SET_FILE, &eval_bytes)?;
    dir.write_bytes(ITEM_STATS_FILE, &jsonl_bytes(stats.iter()))?;

    let cells = cells_for(cfg);
    let mut meta = RunMeta {
        dataset_name: dataset.name.clone(),
        universe_size: dataset.universe_size,
        k: cfg.eval.k,
        repetitions: cfg.eval.repetitions,
        include_few_shot_in_ranking: cfg.include_few_shot_in_ranking,
        cells: cells.iter().map(|(c, _)| c.clone()).collect(),
    };
    // Keep cells added later through import-recs.
    for old in previous.into_iter().flat_map(|p| p.cells) {
        if old.source == RunSource::External && !meta.cells.iter().any(|c| c.dir_name() == old.dir_name()) {
            meta.cells.push(old);
        }
    }
    dir.write_json(RUN_FILE, &meta)?;

    let catalog = dataset.catalog_map();
    let engine = PromptEngine::new(&catalog, &stats, dataset.universe_size);
    let popularity = PopularityRanking::new(&stats, dataset.universe_size);
    let renders = AtomicUsize::new(0);
    let t = cfg.eval.repetitions as u32;

    for (cell, model) in &cells {
        let rel = dir.cell_rel(cell, RESPONSES_FILE);
        match &model.spec {
            ModelSpec::Llm(_) => {
                let done = resume(&dir, &rel, t)?;
                let prompt_cfg = PromptConfig {
                    mode: cfg.prompt_mode,
                    recommendation_length: cfg.eval.k,
                    dataset_name: dataset.name.clone(),
                };
                let sequences: Vec<UserSequence> = eval_set.iter().map(|s| cell.mode.apply(s)).collect();
                let jobs: Vec<(usize, u32)> = (0..sequences.len())
                    .flat_map(|i| (1..=t).map(move |r| (i, r)))
                    .filter(|&(i, r)| !done.contains(&(sequences[i].user_id, r)))
                    .collect();
                log::info!(
                    "{} ({}): {} requests, {} already persisted",
                    cell.model,
                    cell.mode,
                    jobs.len(),
                    done.len()
                );
                let llm = LlmCell {
                    dir: &dir,
                    rel: &rel,
                    client: &clients[model.name.as_str()],
                    engine: &engine,
                    prompt_cfg: &prompt_cfg,
                    sequences: &sequences,
                    renders: &renders,
                };
                llm.run(jobs)?;
            }
            ModelSpec::Builtin { baseline } => {
                let done = resume(&dir, &rel, t)?;
                for seq in &eval_set {
                    for run in (1..=t).filter(|r| !done.contains(&(seq.user_id, *r))) {
                        let started = Instant::now();
                        let items = match baseline {
                            BaselineKind::Popularity => popularity.top(cfg.eval.k).to_vec(),
                            BaselineKind::Random => builtin_recommend(
                                *baseline,
                                &stats,
                                dataset.universe_size,
                                cfg.eval.k,
                                derive_seed(cfg.seed, seq.user_id, run),
                            )?,
                        };
                        let elapsed = started.elapsed().as_secs_f64();
                        let record = ResponseRecord::from(RecommendationRun {
                            user_id: seq.user_id,
                            run_index: run,
                            source: RunSource::Builtin,
                            raw_text: String::new(),
                            item_ids: items.into_iter().map(u64::from).collect(),
                            elapsed_seconds: elapsed,
                            failure: None,
                        });
                        dir.append_jsonl(&rel, &record)?;
                    }
                }
            }
            ModelSpec::External { file, .. } => {
                write_external_cell(&dir, cell, file, &meta, &eval_set)?;
            }
        }
        sort_responses(&dir, &rel)?;
    }

    let rows = regenerate_reports(dir.root())?;
    dir.write_manifest()?;
    Ok(RunOutcome {
        run_dir: dir.root().to_path_buf(),
        rows,
        prompt_renders: renders.into_inner(),
    })
}

/// Rewrites a cell's response log without failed or out-of-range entries and
/// returns the (user, run) pairs that need no new request.
fn resume(dir: &RunDir, rel: &str, t: u32) -> Result<HashSet<(u32, u32)>, RunError> {
    if !dir.exists(rel) {
        return Ok(HashSet::new());
    }
    let mut kept: Vec<ResponseRecord> = dir.read_jsonl(rel)?;
    kept.retain(|r| r.failure.is_none() && (1..=t).contains(&r.run));
    let mut done = HashSet::new();
    kept.retain(|r| done.insert((r.user, r.run)));
    dir.write_bytes(rel, &jsonl_bytes(&kept))?;
    Ok(done)
}

fn sort_responses(dir: &RunDir, rel: &str) -> Result<(), RunError> {
    let mut rows: Vec<ResponseRecord> = if dir.exists(rel) {
        dir.read_jsonl(rel)?
    } else {
        Vec::new()
    };
    rows.sort_by_key(|r| (r.user, r.run));
    dir.write_bytes(rel, &jsonl_bytes(&rows))?;
    Ok(())
}

struct LlmCell<'a> {
    dir: &'a RunDir,
    rel: &'a str,
    client: &'a ChatClient,
    engine: &'a PromptEngine<'a>,
    prompt_cfg: &'a PromptConfig,
    sequences: &'a [UserSequence],
    renders: &'a AtomicUsize,
}

impl LlmCell<'_> {
    /// Workers (bounded by `max_in_flight`) issue requests; this thread is
    /// the only writer of the response log.
    fn run(&self, jobs: Vec<(usize, u32)>) -> Result<(), RunError> {
        if jobs.is_empty() {
            return Ok(());
        }
        let workers = self.client.config().max_in_flight.clamp(1, jobs.len());
        let queue = Mutex::new(jobs.into_iter());
        let abort = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<Result<RecommendationRun, AdapterError>>();

        std::thread::scope(|s| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (queue, abort) = (&queue, &abort);
                s.spawn(move || loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let Some((idx, run)) = queue.lock().expect("queue lock").next() else {
                        break;
                    };
                    let seq = &self.sequences[idx];
                    self.renders.fetch_add(1, Ordering::Relaxed);
                    let result = match self.engine.render(seq, self.prompt_cfg) {
                        Ok(prompt) => self.client.complete(&prompt, run),
                        Err(e) => Ok(RecommendationRun {
                            user_id: seq.user_id,
                            run_index: run,
                            source: RunSource::Llm,
                            raw_text: String::new(),
                            item_ids: Vec::new(),
                            elapsed_seconds: 0.0,
                            failure: Some(format!("prompt rendering failed: {e}")),
                        }),
                    };
                    let fatal = result.is_err();
                    if fatal {
                        abort.store(true, Ordering::Relaxed);
                    }
                    if tx.send(result).is_err() || fatal {
                        break;
                    }
                });
            }
            drop(tx);

            let mut first_err: Option<RunError> = None;
            for result in rx {
                let outcome = result
                    .map_err(RunError::from)
                    .and_then(|run| Ok(self.dir.append_jsonl(self.rel, &ResponseRecord::from(run))?));
                if let Err(e) = outcome {
                    abort.store(true, Ordering::Relaxed);
                    first_err.get_or_insert(e);
                }
            }
            first_err.map_or(Ok(()), Err)
        })
    }
}

/// Converts an exchange file into a cell's response log. Every (user, run)
/// pair of the eval set gets a record; pairs absent from the file become
/// failures.
fn write_external_cell(
    dir: &RunDir,
    cell: &CellKey,
    file: &Path,
    meta: &RunMeta,
    eval_set: &[UserSequence],
) -> Result<usize, RunError> {
    let imported = import_recommendations(file, meta.universe_size, meta.k)?;
    let mut by_pair: HashMap<(u32, u32), RecommendationRun> = HashMap::new();
    for r in imported.into_iter().filter(|r| r.model == cell.model) {
        by_pair.insert((r.run.user_id, r.run.run_index), r.run);
    }
    if by_pair.is_empty() {
        return Err(RunError::Inconsistent(format!(
            "{} has no recommendations for model {:?}",
            file.display(),
            cell.model
        )));
    }

    let t = meta.repetitions as u32;
    let mut records = Vec::with_capacity(eval_set.len() * meta.repetitions);
    let mut missing = 0usize;
    for seq in eval_set {
        for run in 1..=t {
            let record = match by_pair.remove(&(seq.user_id, run)) {
                Some(r) => ResponseRecord::from(r),
                None => {
                    missing += 1;
                    ResponseRecord {
                        user: seq.user_id,
                        run,
                        source: RunSource::External,
                        raw_text: String::new(),
                        items: Vec::new(),
                        elapsed_s: 0.0,
                        failure: Some("missing from exchange file".into()),
                    }
                }
            };
            records.push(record);
        }
    }
    if missing > 0 {
        log::warn!(
            "{}: {missing} (user, run) pairs missing for {}",
            file.display(),
            cell.model
        );
    }
    if !by_pair.is_empty() {
        log::warn!(
            "{}: ignored {} entries for users outside the eval set or runs beyond T={}",
            file.display(),
            by_pair.len(),
            t
        );
    }
    let n = records.len() - missing;
    dir.write_bytes(&dir.cell_rel(cell, RESPONSES_FILE), &jsonl_bytes(&records))?;
    Ok(n)
}

/// Recomputes every derived artifact of a run directory from its persisted
/// inputs and responses, then writes the report files. Does not touch the
/// manifest beyond removing a stale one.
pub fn regenerate_reports(run_dir: &Path) -> Result<Vec<ReportRow>, RunError> {
    let dir = RunDir::new(run_dir);
    let meta: RunMeta = dir.read_json(RUN_FILE)?;
    let eval_set: Vec<UserSequence> = dir.read_jsonl(EVAL_SET_FILE)?;
    let stats: ItemStatsTable = dir.read_jsonl::<ItemStats>(ITEM_STATS_FILE)?.into_iter().collect();
    dir.remove_manifest()?;

    let eval_cfg = EvalConfig {
        k: meta.k,
        repetitions: meta.repetitions,
    };
    let mut rows = Vec::with_capacity(meta.cells.len());
    for cell in &meta.cells {
        let responses_rel = dir.cell_rel(cell, RESPONSES_FILE);
        let responses: Vec<ResponseRecord> = dir.read_jsonl(&responses_rel)?;

        let mut observations: BTreeMap<u32, PerUserObservation> = eval_set
            .iter()
            .map(|s| {
                (
                    s.user_id,
                    PerUserObservation {
                        user_id: s.user_id,
                        ground_truth: s.ground_truth,
                        runs: Vec::new(),
                    },
                )
            })
            .collect();
        let mut timings = TimingLog::default();
        let mut extracted = Vec::with_capacity(responses.len());
        let mut failures = 0;
        for (idx, r) in responses.iter().enumerate() {
            let Some(obs) = observations.get_mut(&r.user) else {
                return Err(ReportError::Malformed {
                    path: dir.path(&responses_rel),
                    line: idx + 1,
                    reason: format!("user {} is not in the evaluation set", r.user),
                }
                .into());
            };
            if r.failure.is_some() {
                failures += 1;
                continue;
            }
            let list = match r.source {
                RunSource::Llm => extract_and_validate(&r.raw_text, meta.universe_size, meta.k, r.user, r.run),
                RunSource::Builtin | RunSource::External => {
                    validate_ids(r.items.iter().copied(), meta.universe_size, meta.k, r.user, r.run)
                }
            };
            extracted.push(list.clone());
            if list.is_empty() {
                failures += 1;
                continue;
            }
            timings.push(format!("{}:{}", r.user, r.run), r.elapsed_s);
            obs.runs.push(list);
        }
        let observations: Vec<PerUserObservation> = observations.into_values().collect();
        let metrics = evaluate(&observations, &stats, &timings, &eval_cfg, failures);
        let hallucination = hallucination_rate(&extracted);

        dir.write_bytes(
            &dir.cell_rel(cell, EXTRACTED_FILE),
            &jsonl_bytes(extracted.iter().map(|l| ExtractedRecord {
                user: l.user_id,
                run: l.run_index,
                items: l.items.clone(),
                hallucinated: l.hallucinated.clone(),
            })),
        )?;
        let per_user_rel = dir.cell_rel(cell, PER_USER_FILE);
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in per_user_rows(&observations, &stats, meta.k) {
            w.serialize(row).map_err(|e| RunError::Inconsistent(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| RunError::Inconsistent(e.to_string()))?;
        dir.write_bytes(&per_user_rel, &bytes)?;
        dir.write_json(&dir.cell_rel(cell, METRICS_FILE), &metrics)?;

        rows.push(ReportRow {
            model: cell.model.clone(),
            mode: cell.mode,
            metrics,
            hallucination,
            attempted: responses.len(),
        });
    }

    let files = emit_report(
        &rows,
        &ReportContext {
            dataset_name: &meta.dataset_name,
            k: meta.k,
            repetitions: meta.repetitions,
            include_few_shot_in_ranking: meta.include_few_shot_in_ranking,
        },
    )?;
    for (name, contents) in files.entries() {
        dir.write_bytes(name, contents.as_bytes())?;
    }
    Ok(rows)
}

/// `report` verb: regenerate and re-seal the manifest.
pub fn report(run_dir: &Path) -> Result<Vec<ReportRow>, RunError> {
    let rows = regenerate_reports(run_dir)?;
    RunDir::new(run_dir).write_manifest()?;
    Ok(rows)
}

/// Writes the run's eval set as exchange requests.
pub fn export_run_requests(run_dir: &Path, out: &Path, mode: SequenceMode) -> Result<usize, RunError> {
    let dir = RunDir::new(run_dir);
    let meta: RunMeta = dir.read_json(RUN_FILE)?;
    let eval_set: Vec<UserSequence> = dir.read_jsonl(EVAL_SET_FILE)?;
    let trimmed: Vec<UserSequence> = eval_set.iter().map(|s| mode.apply(s)).collect();
    Ok(export_requests(&trimmed, meta.k, mode, out)?)
}

/// Adds (or replaces) an external model's cell from an exchange file, then
/// regenerates the reports.
pub fn import_run_recommendations(
    run_dir: &Path,
    file: &Path,
    model: &str,
    mode: SequenceMode,
) -> Result<Vec<ReportRow>, RunError> {
    let dir = RunDir::new(run_dir);
    let mut meta: RunMeta = dir.read_json(RUN_FILE)?;
    let eval_set: Vec<UserSequence> = dir.read_jsonl(EVAL_SET_FILE)?;
    let cell = CellKey {
        model: model.to_string(),
        mode,
        source: RunSource::External,
    };
    if let Some(existing) = meta.cells.iter().find(|c| c.dir_name() == cell.dir_name()) {
        if existing.source != RunSource::External {
            return Err(RunError::Inconsistent(format!(
                "model {model:?} ({mode}) already exists in this run as a {:?} source",
                existing.source
            )));
        }
    } else {
        meta.cells.push(cell.clone());
    }
    dir.remove_manifest()?;
    let n = write_external_cell(&dir, &cell, file, &meta, &eval_set)?;
    log::info!("imported {n} runs for {model}");
    dir.write_json(RUN_FILE, &meta)?;
    report(run_dir)
}
