//! On-disk layout of a run directory and its content manifest.
//!
//! ```text
//! run/
//!   config.json          resolved configuration
//!   templates.json       template checksums
//!   dataset.json         name, universe size, ingest summary
//!   eval_set.jsonl       one UserSequence per line
//!   item_stats.jsonl     one ItemStats per line
//!   run.json             K, T and the list of cells
//!   cells/<model>__<mode>/
//!     responses.jsonl  extracted.jsonl  per_user_metrics.csv  metrics.json
//!   report.md  report.csv  overall_scores.csv  hallucination.csv
//!   manifest.json        relative path -> sha256
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;
use crate::adapters::{RecommendationRun, RunSource};
use crate::dataset::{IngestSummary, SequenceMode};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RUN_FILE: &str = "run.json";
pub const CONFIG_FILE: &str = "config.json";
pub const TEMPLATES_FILE: &str = "templates.json";
pub const DATASET_FILE: &str = "dataset.json";
pub const EVAL_SET_FILE: &str = "eval_set.jsonl";
pub const ITEM_STATS_FILE: &str = "item_stats.jsonl";
pub const RESPONSES_FILE: &str = "responses.jsonl";
pub const EXTRACTED_FILE: &str = "extracted.jsonl";
pub const PER_USER_FILE: &str = "per_user_metrics.csv";
pub const METRICS_FILE: &str = "metrics.json";

/// Relative path (always `/`-separated) to lowercase hex sha256.
pub type Manifest = BTreeMap<String, String>;

/// One (model, mode) combination evaluated in a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellKey {
    pub model: String,
    pub mode: SequenceMode,
    pub source: RunSource,
}

impl CellKey {
    pub fn dir_name(&self) -> String {
        let model: String = self
            .model
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        format!("{model}__{}", self.mode.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub dataset_name: String,
    pub universe_size: u32,
    pub k: usize,
    pub repetitions: usize,
    pub include_few_shot_in_ranking: bool,
    pub cells: Vec<CellKey>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub universe_size: u32,
    pub num_users: usize,
    pub eval_users: usize,
    pub summary: IngestSummary,
}

/// A line of `responses.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub user: u32,
    pub run: u32,
    pub source: RunSource,
    pub raw_text: String,
    pub items: Vec<u64>,
    pub elapsed_s: f64,
    pub failure: Option<String>,
}

impl From<RecommendationRun> for ResponseRecord {
    fn from(r: RecommendationRun) -> Self {
        ResponseRecord {
            user: r.user_id,
            run: r.run_index,
            source: r.source,
            raw_text: r.raw_text,
            items: r.item_ids,
            elapsed_s: r.elapsed_seconds,
            failure: r.failure,
        }
    }
}

/// A line of `extracted.jsonl`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedRecord {
    pub user: u32,
    pub run: u32,
    pub items: Vec<u32>,
    pub hallucinated: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn cell_rel(&self, cell: &CellKey, file: &str) -> String {
        format!("cells/{}/{file}", cell.dir_name())
    }

    fn io(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
        move |source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    pub fn write_bytes(&self, rel: &str, bytes: &[u8]) -> Result<(), ReportError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(Self::io(parent))?;
        }
        fs::write(&path, bytes).map_err(Self::io(&path))
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<(), ReportError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("artifact types serialize");
        bytes.push(b'\n');
        self.write_bytes(rel, &bytes)
    }

    pub fn write_jsonl<T: Serialize>(&self, rel: &str, rows: impl IntoIterator<Item = T>) -> Result<(), ReportError> {
        let mut bytes = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut bytes, &row).expect("artifact types serialize");
            bytes.push(b'\n');
        }
        self.write_bytes(rel, &bytes)
    }

    /// Appends one JSON line and flushes, creating the file if needed.
    pub fn append_jsonl<T: Serialize>(&self, rel: &str, row: &T) -> Result<(), ReportError> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(Self::io(parent))?;
        }
        let mut line = serde_json::to_vec(row).expect("artifact types serialize");
        line.push(b'\n');
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(Self::io(&path))?;
        f.write_all(&line).map_err(Self::io(&path))?;
        f.flush().map_err(Self::io(&path))
    }

    pub fn read_bytes(&self, rel: &str) -> Result<Vec<u8>, ReportError> {
        let path = self.path(rel);
        match fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(ReportError::MissingArtifact(path)),
            Err(e) => Err(ReportError::Io { path, source: e }),
        }
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T, ReportError> {
        let bytes = self.read_bytes(rel)?;
        serde_json::from_slice(&bytes).map_err(|e| ReportError::Malformed {
            path: self.path(rel),
            line: e.line(),
            reason: e.to_string(),
        })
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, rel: &str) -> Result<Vec<T>, ReportError> {
        let bytes = self.read_bytes(rel)?;
        let text = String::from_utf8(bytes).map_err(|e| ReportError::Malformed {
            path: self.path(rel),
            line: 0,
            reason: e.to_string(),
        })?;
        let mut rows = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            rows.push(serde_json::from_str(line).map_err(|e| ReportError::Malformed {
                path: self.path(rel),
                line: idx + 1,
                reason: e.to_string(),
            })?);
        }
        Ok(rows)
    }

    pub fn remove_manifest(&self) -> Result<(), ReportError> {
        let path = self.path(MANIFEST_FILE);
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(ReportError::Io { path, source: e }),
        }
    }

    /// Hashes every file under the root (except the manifest itself) and
    /// writes `manifest.json` through a temporary file and rename.
    pub fn write_manifest(&self) -> Result<Manifest, ReportError> {
        let manifest = self.hash_tree()?;
        let tmp = self.path(".manifest.json.tmp");
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        fs::write(&tmp, &bytes).map_err(Self::io(&tmp))?;
        let dest = self.path(MANIFEST_FILE);
        if let Err(e) = fs::rename(&tmp, &dest) {
            let _ = fs::remove_file(&tmp);
            return Err(ReportError::Io { path: dest, source: e });
        }
        Ok(manifest)
    }

    fn hash_tree(&self) -> Result<Manifest, ReportError> {
        let mut manifest = Manifest::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir).map_err(Self::io(&dir))? {
                let entry = entry.map_err(Self::io(&dir))?;
                let path = entry.path();
                let ft = entry.file_type().map_err(Self::io(&path))?;
                if ft.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel = relative(&self.root, &path);
                if rel == MANIFEST_FILE || rel.starts_with(".manifest") {
                    continue;
                }
                let bytes = fs::read(&path).map_err(Self::io(&path))?;
                manifest.insert(rel, hex::encode(Sha256::digest(&bytes)));
            }
        }
        Ok(manifest)
    }
}

fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

/// Writes `artifacts` (relative path, contents) into `run_dir` and then a
/// manifest covering everything in the directory. The previous manifest is
/// removed first, so a failed write never leaves a manifest that vouches for
/// half-written files.
pub fn persist_run(run_dir: &Path, artifacts: &[(String, Vec<u8>)]) -> Result<Manifest, ReportError> {
    let dir = RunDir::new(run_dir);
    fs::create_dir_all(run_dir).map_err(RunDir::io(run_dir))?;
    dir.remove_manifest()?;
    for (rel, bytes) in artifacts {
        dir.write_bytes(rel, bytes)?;
    }
    dir.write_manifest()
}

/// Files whose current hash differs from the manifest (including files that
/// disappeared or appeared since).
pub fn verify_manifest(run_dir: &Path) -> Result<Vec<String>, ReportError> {
    let dir = RunDir::new(run_dir);
    let recorded: Manifest = dir.read_json(MANIFEST_FILE)?;
    let current = dir.hash_tree()?;
    let mut bad: Vec<String> = recorded
        .iter()
        .filter(|(path, hash)| current.get(*path) != Some(*hash))
        .map(|(path, _)| path.clone())
        .collect();
    bad.extend(current.keys().filter(|p| !recorded.contains_key(*p)).cloned());
    bad.sort();
    Ok(bad)
}
