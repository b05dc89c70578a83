//! Dataset ingestion, chronological splitting and item statistics.
//!
//! Every native format is converted into a [`NormalizedDataset`]; the split
//! and statistics code only ever sees that canonical form.

mod loaders;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use loaders::{read_normalized, write_normalized};

/// Attribute key holding an intrinsic item quality score (Yelp business stars).
pub const STARS_ATTR: &str = "stars";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),
    #[error("unknown dataset format `{0}` (expected ml100k, beauty, yelp or normalized)")]
    UnknownFormat(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn malformed(path: &Path, line: usize, reason: impl Into<String>) -> Self {
        DatasetError::Malformed {
            path: path.to_path_buf(),
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawInteraction {
    pub user_id: u32,
    pub item_id: u32,
    pub rating: f64,
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: u32,
    /// Attribute values keyed by canonical names (`title`, `category`, ...),
    /// in the order the source declared them.
    pub attributes: IndexMap<String, String>,
}

impl ItemRecord {
    pub fn new(item_id: u32) -> Self {
        ItemRecord {
            item_id,
            attributes: IndexMap::new(),
        }
    }

    pub fn attr(&self, key: &str) -> Option<&str> {
        self.attributes
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.trim().is_empty())
    }

    /// Dataset-intrinsic quality score, when the source provides one.
    pub fn intrinsic_quality(&self) -> Option<f64> {
        self.attr(STARS_ATTR)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|q| q.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItemStats {
    pub item_id: u32,
    /// Number of history interactions referencing the item.
    pub popularity: u64,
    /// `None` when the item has neither history ratings nor an intrinsic score.
    pub quality: Option<f64>,
}

/// Item statistics keyed by id. Lookups for ids without an entry behave as
/// zero popularity and undefined quality.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemStatsTable(pub BTreeMap<u32, ItemStats>);

impl ItemStatsTable {
    pub fn get(&self, item_id: u32) -> Option<&ItemStats> {
        self.0.get(&item_id)
    }

    pub fn popularity(&self, item_id: u32) -> u64 {
        self.0.get(&item_id).map_or(0, |s| s.popularity)
    }

    pub fn quality(&self, item_id: u32) -> Option<f64> {
        self.0.get(&item_id).and_then(|s| s.quality)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ItemStats> {
        self.0.values()
    }
}

impl FromIterator<ItemStats> for ItemStatsTable {
    fn from_iter<I: IntoIterator<Item = ItemStats>>(iter: I) -> Self {
        ItemStatsTable(iter.into_iter().map(|s| (s.item_id, s)).collect())
    }
}

/// Counts observed in the source before user filtering.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub raw_interactions: usize,
    pub raw_users: usize,
    pub raw_items: usize,
    pub removed_users: usize,
    pub removed_interactions: usize,
    pub synthesized_items: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedDataset {
    pub name: String,
    /// Interactions in source-file order.
    pub interactions: Vec<RawInteraction>,
    /// Catalog sorted by item id.
    pub catalog: Vec<ItemRecord>,
    pub universe_size: u32,
    pub summary: IngestSummary,
}

impl NormalizedDataset {
    pub fn catalog_map(&self) -> HashMap<u32, &ItemRecord> {
        self.catalog.iter().map(|r| (r.item_id, r)).collect()
    }

    pub fn num_users(&self) -> usize {
        let mut users: Vec<u32> = self.interactions.iter().map(|i| i.user_id).collect();
        users.sort_unstable();
        users.dedup();
        users.len()
    }
}

/// One evaluation unit: chronological history plus the held-out next item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSequence {
    pub user_id: u32,
    pub history: Vec<u32>,
    pub ground_truth: u32,
}

/// Which part of a user's history a model sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum SequenceMode {
    #[default]
    Full,
    /// Only the `n` most recent history items, in order.
    FewShot(usize),
}

impl SequenceMode {
    pub fn apply(self, seq: &UserSequence) -> UserSequence {
        match self {
            SequenceMode::Full => seq.clone(),
            SequenceMode::FewShot(n) => UserSequence {
                user_id: seq.user_id,
                history: seq.history[seq.history.len().saturating_sub(n)..].to_vec(),
                ground_truth: seq.ground_truth,
            },
        }
    }

    /// Machine label: `full` or `few_shot_<n>`.
    pub fn label(self) -> String {
        match self {
            SequenceMode::Full => "full".to_string(),
            SequenceMode::FewShot(n) => format!("few_shot_{n}"),
        }
    }

    /// Suffix for report rows, e.g. ` (few-shot-5)`; empty for full mode.
    pub fn row_suffix(self) -> String {
        match self {
            SequenceMode::Full => String::new(),
            SequenceMode::FewShot(n) => format!(" (few-shot-{n})"),
        }
    }
}

impl fmt::Display for SequenceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for SequenceMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "full" {
            return Ok(SequenceMode::Full);
        }
        let n = s
            .strip_prefix("few_shot_")
            .or_else(|| s.strip_prefix("few-shot-"))
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n >= 1)
            .ok_or_else(|| format!("invalid sequence mode `{s}` (expected `full` or `few_shot_<n>`)"))?;
        Ok(SequenceMode::FewShot(n))
    }
}

impl Serialize for SequenceMode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for SequenceMode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Ml100k,
    #[serde(alias = "beauty_json")]
    Beauty,
    #[serde(alias = "yelp_json")]
    Yelp,
    Normalized,
}

impl DatasetFormat {
    pub fn default_name(self) -> &'static str {
        match self {
            DatasetFormat::Ml100k => "ML-100K",
            DatasetFormat::Beauty => "Beauty",
            DatasetFormat::Yelp => "Yelp",
            DatasetFormat::Normalized => "dataset",
        }
    }
}

impl FromStr for DatasetFormat {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ml100k" | "ml-100k" => Ok(DatasetFormat::Ml100k),
            "beauty" | "beauty_json" => Ok(DatasetFormat::Beauty),
            "yelp" | "yelp_json" => Ok(DatasetFormat::Yelp),
            "normalized" => Ok(DatasetFormat::Normalized),
            other => Err(DatasetError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetFormat::Ml100k => "ml100k",
            DatasetFormat::Beauty => "beauty",
            DatasetFormat::Yelp => "yelp",
            DatasetFormat::Normalized => "normalized",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub min_interactions: usize,
    pub max_seq_len: usize,
    pub split_ratio: f64,
}

impl DatasetSpec {
    /// Preprocessing defaults for a source format: Yelp keeps users with at
    /// least 10 interactions and 100 history items, the others 5 and 50.
    pub fn for_format(format: DatasetFormat) -> Self {
        let (min_interactions, max_seq_len) = match format {
            DatasetFormat::Yelp => (10, 100),
            _ => (5, 50),
        };
        DatasetSpec {
            name: format.default_name().to_string(),
            min_interactions,
            max_seq_len,
            split_ratio: 0.9,
        }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.min_interactions == 0 {
            return Err(DatasetError::InvalidSpec("min_interactions must be >= 1".into()));
        }
        if self.max_seq_len == 0 {
            return Err(DatasetError::InvalidSpec("max_seq_len must be >= 1".into()));
        }
        if !(self.split_ratio > 0.0 && self.split_ratio < 1.0) {
            return Err(DatasetError::InvalidSpec(format!(
                "split_ratio must lie in (0, 1), got {}",
                self.split_ratio
            )));
        }
        Ok(())
    }

    /// Size of the history portion for a user with `n` interactions.
    pub fn history_len(&self, n: usize) -> usize {
        // The epsilon absorbs representation error in products that are
        // mathematically integral (e.g. 0.9 * 30).
        ((self.split_ratio * n as f64) + 1e-9).floor() as usize
    }
}

/// Loads a dataset from `source` and removes users below `spec.min_interactions`.
pub fn ingest(spec: &DatasetSpec, source: &Path, format: DatasetFormat) -> Result<NormalizedDataset, DatasetError> {
    spec.validate()?;
    let loaded = match format {
        DatasetFormat::Ml100k => loaders::load_ml100k(source)?,
        DatasetFormat::Beauty => loaders::load_beauty(source)?,
        DatasetFormat::Yelp => loaders::load_yelp(source)?,
        DatasetFormat::Normalized => loaders::load_normalized(source)?,
    };
    Ok(finish(spec, loaded))
}

pub(crate) struct Loaded {
    pub interactions: Vec<RawInteraction>,
    pub catalog: BTreeMap<u32, ItemRecord>,
}

fn finish(spec: &DatasetSpec, loaded: Loaded) -> NormalizedDataset {
    let Loaded {
        interactions,
        mut catalog,
    } = loaded;

    let mut per_user: HashMap<u32, usize> = HashMap::new();
    for it in &interactions {
        *per_user.entry(it.user_id).or_default() += 1;
    }
    let mut raw_items: Vec<u32> = interactions.iter().map(|i| i.item_id).collect();
    raw_items.sort_unstable();
    raw_items.dedup();

    let mut summary = IngestSummary {
        raw_interactions: interactions.len(),
        raw_users: per_user.len(),
        raw_items: raw_items.len(),
        ..IngestSummary::default()
    };
    summary.removed_users = per_user.values().filter(|&&n| n < spec.min_interactions).count();

    let kept: Vec<RawInteraction> = interactions
        .into_iter()
        .filter(|it| per_user[&it.user_id] >= spec.min_interactions)
        .collect();
    summary.removed_interactions = summary.raw_interactions - kept.len();

    for it in &kept {
        if let std::collections::btree_map::Entry::Vacant(slot) = catalog.entry(it.item_id) {
            summary.synthesized_items += 1;
            slot.insert(ItemRecord::new(it.item_id));
        }
    }
    if summary.synthesized_items > 0 {
        log::warn!(
            "{}: {} referenced items had no catalog entry; synthesized empty records",
            spec.name,
            summary.synthesized_items
        );
    }
    if summary.removed_users > 0 {
        log::info!(
            "{}: removed {} users with fewer than {} interactions",
            spec.name,
            summary.removed_users,
            spec.min_interactions
        );
    }

    let universe_size = catalog
        .keys()
        .copied()
        .chain(kept.iter().map(|i| i.item_id))
        .max()
        .unwrap_or(1)
        .max(1);

    NormalizedDataset {
        name: spec.name.clone(),
        interactions: kept,
        catalog: catalog.into_values().collect(),
        universe_size,
        summary,
    }
}

/// Groups interactions per user and orders each group chronologically,
/// breaking timestamp ties by source position.
fn chronological_by_user(interactions: &[RawInteraction]) -> BTreeMap<u32, Vec<RawInteraction>> {
    let mut by_user: BTreeMap<u32, Vec<RawInteraction>> = BTreeMap::new();
    for it in interactions {
        by_user.entry(it.user_id).or_default().push(*it);
    }
    for seq in by_user.values_mut() {
        seq.sort_by_key(|it| it.timestamp);
    }
    by_user
}

/// Index range of the (truncated) history window and the ground-truth index.
fn split_indices(spec: &DatasetSpec, n: usize) -> Option<(std::ops::Range<usize>, usize)> {
    let cut = spec.history_len(n);
    if cut == 0 || cut >= n {
        return None;
    }
    let start = cut.saturating_sub(spec.max_seq_len);
    Some((start..cut, cut))
}

/// Builds one [`UserSequence`] per user, ordered by ascending user id.
pub fn build_eval_set(dataset: &NormalizedDataset, spec: &DatasetSpec) -> Vec<UserSequence> {
    let by_user = chronological_by_user(&dataset.interactions);
    let users: Vec<(u32, Vec<RawInteraction>)> = by_user.into_iter().collect();

    let built: Vec<Option<UserSequence>> = users
        .par_iter()
        .map(|(user_id, seq)| {
            let (window, gt) = split_indices(spec, seq.len())?;
            Some(UserSequence {
                user_id: *user_id,
                history: seq[window].iter().map(|it| it.item_id).collect(),
                ground_truth: seq[gt].item_id,
            })
        })
        .collect();

    let excluded = built.iter().filter(|s| s.is_none()).count();
    if excluded > 0 {
        log::warn!(
            "{}: excluded {} users whose split left no held-out item or no history",
            dataset.name,
            excluded
        );
    }
    built.into_iter().flatten().collect()
}

/// Popularity and quality from the history portions of `eval_set`.
///
/// Held-out interactions and users absent from the eval set do not count.
/// Every catalog item receives an entry.
pub fn compute_item_stats(
    dataset: &NormalizedDataset,
    eval_set: &[UserSequence],
    spec: &DatasetSpec,
) -> ItemStatsTable {
    let by_user = chronological_by_user(&dataset.interactions);
    let mut counts: BTreeMap<u32, (u64, f64)> = BTreeMap::new();

    for seq in eval_set {
        let window = by_user.get(&seq.user_id).and_then(|events| {
            let (range, _) = split_indices(spec, events.len())?;
            Some(&events[range])
        });
        let Some(window) = window else {
            log::warn!("user {} is not splittable under the given spec; skipped", seq.user_id);
            continue;
        };
        debug_assert!(window.iter().map(|e| e.item_id).eq(seq.history.iter().copied()));
        for event in window {
            let entry = counts.entry(event.item_id).or_insert((0, 0.0));
            entry.0 += 1;
            entry.1 += event.rating;
        }
    }

    let catalog = dataset.catalog_map();
    let mut ids: Vec<u32> = catalog.keys().copied().chain(counts.keys().copied()).collect();
    ids.sort_unstable();
    ids.dedup();

    ids.into_iter()
        .map(|item_id| {
            let (popularity, rating_sum) = counts.get(&item_id).copied().unwrap_or((0, 0.0));
            let intrinsic = catalog.get(&item_id).and_then(|r| r.intrinsic_quality());
            let quality = intrinsic.or_else(|| (popularity > 0).then(|| rating_sum / popularity as f64));
            ItemStats {
                item_id,
                popularity,
                quality,
            }
        })
        .collect()
}
