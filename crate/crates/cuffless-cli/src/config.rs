//! Run configuration with flags > config file > environment > defaults
//! precedence. The resolved configuration (and its fingerprint) is embedded
//! in every output artifact.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cuffless::estimation::{AdaBoostParams, BaselineHyper, EndpointConfig, TreeParams};
use cuffless::features::GroupingPreset;
use cuffless::prompting::ContextLevel;

/// Optional TOML config file contents. Every field falls back to the
/// environment (`CUFFLESS_*`) and then to built-in defaults.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub context: Option<String>,
    pub grouping: Option<String>,
    pub estimator: Option<String>,
    pub jobs: Option<usize>,
    pub endpoint: Option<EndpointFileConfig>,
    pub hyper: Option<HyperFileConfig>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointFileConfig {
    pub base_url: Option<String>,
    pub model: Option<String>,
    pub timeout_s: Option<f64>,
    pub max_retries: Option<u32>,
    pub max_concurrency: Option<usize>,
    pub temperature: Option<f64>,
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperFileConfig {
    pub dtr_max_depth: Option<usize>,
    pub dtr_min_leaf: Option<usize>,
    pub ada_rounds: Option<usize>,
    pub ada_tree_depth: Option<usize>,
}

pub fn load_file_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let raw = std::fs::read_to_string(p)
                .with_context(|| format!("cannot read config file {}", p.display()))?;
            toml::from_str(&raw).with_context(|| format!("invalid config file {}", p.display()))
        }
    }
}

fn env_var<T: std::str::FromStr>(name: &str) -> Option<T> {
    std::env::var(name).ok().and_then(|v| v.parse().ok())
}

/// One knob: flag, then file, then environment, then default.
pub fn resolve<T: std::str::FromStr>(
    flag: Option<T>,
    file: Option<T>,
    env_name: &str,
    default: T,
) -> T {
    flag.or(file)
        .or_else(|| env_var(env_name))
        .unwrap_or(default)
}

/// Fully resolved evaluation settings, recorded in artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedRun {
    pub alpha: f64,
    pub folds: usize,
    pub seed: u64,
    pub context: ContextLevel,
    pub grouping: GroupingPreset,
    pub estimator: String,
    pub record_level_split: bool,
    pub endpoint_base_url: String,
    pub endpoint_model: String,
}

pub fn endpoint_config(
    url_flag: Option<String>,
    model_flag: Option<String>,
    file: Option<&EndpointFileConfig>,
    concurrency_flag: Option<usize>,
) -> EndpointConfig {
    let defaults = EndpointConfig::default();
    let file = file.cloned().unwrap_or_default();
    EndpointConfig {
        base_url: resolve(
            url_flag,
            file.base_url,
            "CUFFLESS_ENDPOINT_URL",
            defaults.base_url,
        ),
        model_name: resolve(model_flag, file.model, "CUFFLESS_MODEL", defaults.model_name),
        timeout_s: file.timeout_s.unwrap_or(defaults.timeout_s),
        max_retries: file.max_retries.unwrap_or(defaults.max_retries),
        max_concurrency: concurrency_flag
            .or(file.max_concurrency)
            .unwrap_or(defaults.max_concurrency),
        temperature: file.temperature.unwrap_or(defaults.temperature),
        api_key_env: file.api_key_env.unwrap_or(defaults.api_key_env),
        retry_backoff_s: defaults.retry_backoff_s,
    }
}

pub fn baseline_hyper(file: Option<&HyperFileConfig>) -> BaselineHyper {
    let defaults = BaselineHyper::default();
    let file = file.cloned().unwrap_or_default();
    BaselineHyper {
        dtr: TreeParams {
            max_depth: file.dtr_max_depth.unwrap_or(defaults.dtr.max_depth),
            min_samples_leaf: file.dtr_min_leaf.unwrap_or(defaults.dtr.min_samples_leaf),
            min_samples_split: defaults.dtr.min_samples_split,
        },
        adaboost: AdaBoostParams {
            n_rounds: file.ada_rounds.unwrap_or(defaults.adaboost.n_rounds),
            tree: TreeParams {
                max_depth: file.ada_tree_depth.unwrap_or(defaults.adaboost.tree.max_depth),
                ..defaults.adaboost.tree
            },
        },
    }
}

/// Short hex fingerprint of any serializable configuration.
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_string(value).expect("serializable config").as_bytes());
    hasher
        .finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Metadata header written into CSV artifacts and sidecar files.
pub fn meta_json(fingerprint: &str, seed: u64) -> String {
    serde_json::json!({
        "tool": cuffless::TOOL_NAME,
        "version": cuffless::TOOL_VERSION,
        "fingerprint": fingerprint,
        "seed": seed,
    })
    .to_string()
}
