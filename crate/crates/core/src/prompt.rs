//! Prompt rendering for LLM recommenders.
//!
//! Two templates ship with the crate (`templates/*.txt`): a general prompt
//! that lists raw history ids, and an augmented prompt with a role
//! instruction, per-item attributes and a strict output format.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{ItemRecord, ItemStatsTable, UserSequence};

pub const TEMPLATE_VERSION: &str = "v1";
pub const GENERAL_TEMPLATE: &str = include_str!("../templates/general.txt");
pub const AUGMENTED_TEMPLATE: &str = include_str!("../templates/augmented.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    General,
    #[default]
    Augmented,
}

impl PromptMode {
    pub fn template(self) -> &'static str {
        match self {
            PromptMode::General => GENERAL_TEMPLATE,
            PromptMode::Augmented => AUGMENTED_TEMPLATE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PromptMode::General => "general",
            PromptMode::Augmented => "augmented",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub mode: PromptMode,
    pub recommendation_length: usize,
    pub dataset_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub user_id: u32,
    pub items_referenced: Vec<u32>,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("empty interaction sequence")]
    EmptySequence,
    #[error("recommendation length must be at least 1")]
    ZeroLength,
    #[error("template placeholder {{{0}}} has no value")]
    UnknownPlaceholder(String),
}

/// SHA-256 (hex) of each shipped template, keyed `<mode>.<version>`.
pub fn template_checksums() -> BTreeMap<String, String> {
    [PromptMode::General, PromptMode::Augmented]
        .into_iter()
        .map(|m| {
            let digest = Sha256::digest(m.template().as_bytes());
            (format!("{}.{TEMPLATE_VERSION}", m.name()), hex::encode(digest))
        })
        .collect()
}

fn sanitize(value: &str) -> String {
    value
        .replace("; ", ",")
        .replace(['\n', '\r', '\t'], " ")
        .replace('{', "(")
        .replace('}', ")")
        .trim()
        .to_string()
}

const TITLE_KEYS: [&str; 2] = ["title", "name"];
const CATEGORY_KEYS: [&str; 2] = ["category", "categories"];

/// `<id> (Title: <t>; Category: <c>; Rating: <q>)`, omitting absent parts.
pub fn format_item_info(item: &ItemRecord, quality: Option<f64>) -> String {
    let lookup = |keys: &[&str]| keys.iter().find_map(|k| item.attr(k)).map(sanitize);
    let mut parts = Vec::with_capacity(3);
    if let Some(title) = lookup(&TITLE_KEYS) {
        parts.push(format!("Title: {title}"));
    }
    if let Some(category) = lookup(&CATEGORY_KEYS) {
        parts.push(format!("Category: {category}"));
    }
    if let Some(q) = quality.filter(|q| q.is_finite()) {
        parts.push(format!("Rating: {q:.1}"));
    }
    if parts.is_empty() {
        item.item_id.to_string()
    } else {
        format!("{} ({})", item.item_id, parts.join("; "))
    }
}

fn substitute(template: &str, values: &HashMap<&str, String>) -> Result<String, PromptError> {
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let after = &rest[open + 1..];
        let close = after
            .find('}')
            .ok_or_else(|| PromptError::UnknownPlaceholder(after.to_string()))?;
        let key = &after[..close];
        let value = values
            .get(key)
            .ok_or_else(|| PromptError::UnknownPlaceholder(key.to_string()))?;
        out.push_str(value);
        rest = &after[close + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Renders prompts for one dataset.
#[derive(Debug, Clone)]
pub struct PromptEngine<'a> {
    pub catalog: &'a HashMap<u32, &'a ItemRecord>,
    pub stats: &'a ItemStatsTable,
    pub universe_size: u32,
}

impl<'a> PromptEngine<'a> {
    pub fn new(catalog: &'a HashMap<u32, &'a ItemRecord>, stats: &'a ItemStatsTable, universe_size: u32) -> Self {
        PromptEngine {
            catalog,
            stats,
            universe_size,
        }
    }

    fn item_info(&self, item_id: u32) -> String {
        let quality = self.stats.quality(item_id);
        match self.catalog.get(&item_id) {
            Some(record) => format_item_info(record, quality),
            None => format_item_info(&ItemRecord::new(item_id), quality),
        }
    }

    pub fn render(&self, seq: &UserSequence, cfg: &PromptConfig) -> Result<RenderedPrompt, PromptError> {
        if seq.history.is_empty() {
            return Err(PromptError::EmptySequence);
        }
        if cfg.recommendation_length == 0 {
            return Err(PromptError::ZeroLength);
        }

        let mut values: HashMap<&str, String> = HashMap::new();
        values.insert("Recommendation_length", cfg.recommendation_length.to_string());
        match cfg.mode {
            PromptMode::General => {
                let mut ids = String::new();
                for (i, id) in seq.history.iter().enumerate() {
                    if i > 0 {
                        ids.push(',');
                    }
                    let _ = write!(ids, "{id}");
                }
                values.insert("Interaction_sequence", ids);
            }
            PromptMode::Augmented => {
                let info: Vec<String> = seq.history.iter().map(|&id| self.item_info(id)).collect();
                values.insert("Interaction_sequence_with_item_info", info.join(", "));
                values.insert("Dataset_name", sanitize(&cfg.dataset_name));
                values.insert("User_id", seq.user_id.to_string());
                values.insert("Total_num_of_items", self.universe_size.to_string());
            }
        }

        Ok(RenderedPrompt {
            text: substitute(cfg.mode.template(), &values)?,
            user_id: seq.user_id,
            items_referenced: seq.history.clone(),
        })
    }
}
