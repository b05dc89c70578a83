//! Sources of recommendation runs: chat-completion endpoints, builtin
//! baselines, and exchange files written by external recommenders.

mod builtin;
mod exchange;
mod llm;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use builtin::{builtin_recommend, derive_seed, BaselineKind, PopularityRanking};
pub use exchange::{export_requests, import_recommendations, ExchangeRequest, ExchangeResponse, ImportedRun};
pub use llm::{request_body, ChatClient, EndpointConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunSource {
    Llm,
    Builtin,
    External,
}

/// One execution of one model for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationRun {
    pub user_id: u32,
    pub run_index: u32,
    pub source: RunSource,
    /// Raw model output; empty for builtin and external sources.
    pub raw_text: String,
    /// Ranked ids as produced, before validation. Empty for LLM runs until
    /// extraction has happened.
    pub item_ids: Vec<u64>,
    pub elapsed_seconds: f64,
    /// Set when the execution failed (e.g. retries exhausted).
    pub failure: Option<String>,
}

impl RecommendationRun {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("{model}: authentication rejected (HTTP {status}); check the API key in the configured environment variable. Response: {body}")]
    Auth { model: String, status: u16, body: String },
    #[error("cannot build HTTP client: {0}")]
    Client(String),
    #[error("requested {k} items but the universe only has {universe_size}")]
    KTooLarge { k: usize, universe_size: u32 },
    #[error("recommendation length must be at least 1")]
    ZeroK,
    #[error("evaluation set is empty; nothing to export")]
    EmptyEvalSet,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {reason}")]
    Malformed { path: PathBuf, line: usize, reason: String },
}
