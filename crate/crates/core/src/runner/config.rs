//! TOML run configuration.
//!
//! ```toml
//! output_dir = "runs/ml100k"
//! seed = 7
//! sequence_modes = ["full", "few_shot_5"]
//!
//! [dataset]
//! format = "ml100k"
//! path = "data/ml-100k"
//!
//! [eval]
//! k = 5
//! repetitions = 10
//!
//! [[models]]
//! kind = "llm"
//! name = "gpt-4o-mini"
//! base_url = "https://api.openai.com/v1"
//! api_key_env = "OPENAI_API_KEY"
//!
//! [[models]]
//! kind = "builtin"
//! name = "pop"
//! baseline = "popularity"
//! ```
//!
//! Relative paths resolve against the directory holding the config file.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adapters::{BaselineKind, EndpointConfig};
use crate::dataset::{DatasetFormat, DatasetSpec, SequenceMode};
use crate::metrics::EvalConfig;
use crate::prompt::PromptMode;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("config error: {0}")]
pub struct ConfigError(pub String);

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    output_dir: Option<PathBuf>,
    seed: Option<u64>,
    sequence_modes: Option<Vec<SequenceMode>>,
    include_few_shot_in_ranking: Option<bool>,
    dataset: Option<RawDataset>,
    #[serde(default)]
    eval: RawEval,
    #[serde(default)]
    prompt: RawPrompt,
    #[serde(default)]
    models: Vec<RawModel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    format: DatasetFormat,
    path: Option<PathBuf>,
    name: Option<String>,
    min_interactions: Option<usize>,
    max_seq_len: Option<usize>,
    split_ratio: Option<f64>,
    max_users: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawEval {
    k: Option<usize>,
    repetitions: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPrompt {
    mode: Option<PromptMode>,
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ModelKind {
    Llm,
    Builtin,
    External,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: ModelKind,
    name: String,
    // llm
    model_name: Option<String>,
    base_url: Option<String>,
    api_key_env: Option<String>,
    temperature: Option<f64>,
    timeout_secs: Option<f64>,
    max_retries: Option<u32>,
    max_in_flight: Option<usize>,
    initial_backoff_ms: Option<u64>,
    // builtin
    baseline: Option<BaselineKind>,
    // external
    file: Option<PathBuf>,
    mode: Option<SequenceMode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSource {
    pub format: DatasetFormat,
    pub path: PathBuf,
    pub spec: DatasetSpec,
    /// Evaluate only the first n users (by id). Item statistics still use
    /// every user.
    pub max_users: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Llm(EndpointConfig),
    Builtin { baseline: BaselineKind },
    External { file: PathBuf, mode: SequenceMode },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    pub name: String,
    pub spec: ModelSpec,
}

/// Fully resolved configuration; serialized as the run's config snapshot.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seed: u64,
    pub dataset: DatasetSource,
    pub eval: EvalConfig,
    pub prompt_mode: PromptMode,
    pub sequence_modes: Vec<SequenceMode>,
    pub include_few_shot_in_ranking: bool,
    pub models: Vec<ModelConfig>,
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

/// Parses and validates config text. `base_dir` anchors relative paths.
pub fn validate_config(raw: &str, base_dir: &Path) -> Result<RunConfig, ConfigError> {
    let cfg: RawConfig = toml::from_str(raw).map_err(|e| bad(e.to_string()))?;

    let ds = cfg.dataset.ok_or_else(|| bad("missing [dataset] section"))?;
    let path = ds.path.ok_or_else(|| bad("missing dataset path"))?;
    let mut spec = DatasetSpec::for_format(ds.format);
    if let Some(name) = ds.name {
        spec.name = name;
    }
    if let Some(v) = ds.min_interactions {
        spec.min_interactions = v;
    }
    if let Some(v) = ds.max_seq_len {
        spec.max_seq_len = v;
    }
    if let Some(v) = ds.split_ratio {
        spec.split_ratio = v;
    }
    spec.validate().map_err(|e| bad(e.to_string()))?;
    if ds.max_users == Some(0) {
        return Err(bad("dataset.max_users must be >= 1"));
    }

    let defaults = EvalConfig::default();
    let eval = EvalConfig {
        k: cfg.eval.k.unwrap_or(defaults.k),
        repetitions: cfg.eval.repetitions.unwrap_or(defaults.repetitions),
    };
    if eval.k == 0 {
        return Err(bad("eval.k must be >= 1"));
    }
    if eval.repetitions == 0 {
        return Err(bad("eval.repetitions must be >= 1"));
    }

    let mut sequence_modes = cfg.sequence_modes.unwrap_or_else(|| vec![SequenceMode::Full]);
    if sequence_modes.is_empty() {
        return Err(bad("sequence_modes is empty"));
    }
    sequence_modes.sort();
    sequence_modes.dedup();

    if cfg.models.is_empty() {
        return Err(bad("no models configured"));
    }
    let mut names = HashSet::new();
    let mut models = Vec::with_capacity(cfg.models.len());
    for m in cfg.models {
        if m.name.trim().is_empty() {
            return Err(bad("model name must not be empty"));
        }
        if !names.insert(m.name.clone()) {
            return Err(bad(format!("duplicate model name {:?}", m.name)));
        }
        models.push(ModelConfig {
            spec: resolve_model(&m, base_dir)?,
            name: m.name,
        });
    }

    Ok(RunConfig {
        output_dir: resolve(base_dir, cfg.output_dir.ok_or_else(|| bad("missing output_dir"))?),
        seed: cfg.seed.unwrap_or(0),
        dataset: DatasetSource {
            format: ds.format,
            path: resolve(base_dir, path),
            spec,
            max_users: ds.max_users,
        },
        eval,
        prompt_mode: cfg.prompt.mode.unwrap_or_default(),
        sequence_modes,
        include_few_shot_in_ranking: cfg.include_few_shot_in_ranking.unwrap_or(false),
        models,
    })
}

fn resolve_model(m: &RawModel, base_dir: &Path) -> Result<ModelSpec, ConfigError> {
    let llm_fields = [
        ("model_name", m.model_name.is_some()),
        ("base_url", m.base_url.is_some()),
        ("api_key_env", m.api_key_env.is_some()),
        ("temperature", m.temperature.is_some()),
        ("timeout_secs", m.timeout_secs.is_some()),
        ("max_retries", m.max_retries.is_some()),
        ("max_in_flight", m.max_in_flight.is_some()),
        ("initial_backoff_ms", m.initial_backoff_ms.is_some()),
    ];
    let reject = |fields: &[(&str, bool)], kind: &str| -> Result<(), ConfigError> {
        match fields.iter().find(|(_, set)| *set) {
            Some((field, _)) => Err(bad(format!(
                "model {:?}: `{field}` does not apply to kind {kind}",
                m.name
            ))),
            None => Ok(()),
        }
    };

    match m.kind {
        ModelKind::Llm => {
            reject(
                &[
                    ("baseline", m.baseline.is_some()),
                    ("file", m.file.is_some()),
                    ("mode", m.mode.is_some()),
                ],
                "llm",
            )?;
            let base_url = m
                .base_url
                .clone()
                .ok_or_else(|| bad(format!("model {:?}: missing base_url", m.name)))?;
            let mut ep = EndpointConfig::new(m.model_name.clone().unwrap_or_else(|| m.name.clone()), base_url);
            ep.api_key_env = m.api_key_env.clone();
            if let Some(v) = m.temperature {
                ep.temperature = v;
            }
            if let Some(v) = m.timeout_secs {
                if v.is_nan() || v <= 0.0 {
                    return Err(bad(format!("model {:?}: timeout_secs must be > 0", m.name)));
                }
                ep.timeout_secs = v;
            }
            if let Some(v) = m.max_retries {
                ep.max_retries = v;
            }
            if let Some(v) = m.max_in_flight {
                if v == 0 {
                    return Err(bad(format!("model {:?}: max_in_flight must be >= 1", m.name)));
                }
                ep.max_in_flight = v;
            }
            if let Some(v) = m.initial_backoff_ms {
                ep.initial_backoff_ms = v;
            }
            Ok(ModelSpec::Llm(ep))
        }
        ModelKind::Builtin => {
            reject(&llm_fields, "builtin")?;
            reject(&[("file", m.file.is_some()), ("mode", m.mode.is_some())], "builtin")?;
            let baseline = m
                .baseline
                .ok_or_else(|| bad(format!("model {:?}: missing baseline", m.name)))?;
            Ok(ModelSpec::Builtin { baseline })
        }
        ModelKind::External => {
            reject(&llm_fields, "external")?;
            reject(&[("baseline", m.baseline.is_some())], "external")?;
            let file = m
                .file
                .clone()
                .ok_or_else(|| bad(format!("model {:?}: missing file", m.name)))?;
            Ok(ModelSpec::External {
                file: resolve(base_dir, file),
                mode: m.mode.unwrap_or_default(),
            })
        }
    }
}
