//! Application configuration: TOML file, then environment, then flags.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{LlmClient, LlmError, MockBackend, MockScript, ProviderConfig, ResponseCache};
use crate::metrics::ScorerConfig;
use crate::pipeline::{Pipeline, PipelineConfig, PipelineError};
use crate::prompts::{PromptError, PromptRegistry};

pub const CONFIG_ENV: &str = "LITERA_CONFIG";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid value for {key}: {message}")]
    Value { key: String, message: String },
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    /// Completed traces kept for `GET /v1/trace/{id}`.
    pub trace_capacity: usize,
    /// How long shutdown waits for in-flight requests.
    pub shutdown_grace_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            trace_capacity: 256,
            shutdown_grace_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub provider: ProviderConfig,
    pub pipeline: PipelineConfig,
    pub scorer: Option<ScorerConfig>,
    pub service: ServiceConfig,
    /// Directory of `<prompt>.txt` files replacing the built-in prompts.
    pub prompt_override_dir: Option<PathBuf>,
    /// Persist provider responses here. Implies `provider.cache_enabled`.
    pub cache_dir: Option<PathBuf>,
    /// Serve provider calls from a scripted mock instead of HTTP.
    pub mock_script: Option<PathBuf>,
}

impl AppConfig {
    pub fn from_toml(path: &Path, text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(path, &text)
    }

    /// Reads `path`, or the file named by `LITERA_CONFIG`, or defaults; then
    /// applies environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let mut cfg = match path.or(env_path.as_deref()) {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Applies `LITERA_*` overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        let get = |k: &str| lookup(k).filter(|v| !v.is_empty());
        if let Some(v) = get("LITERA_PROVIDER_URL") {
            self.provider.base_url = v;
        }
        if let Some(v) = get("LITERA_PROPOSER_MODEL") {
            self.pipeline.proposer_model = v;
        }
        if let Some(v) = get("LITERA_AGGREGATOR_MODEL") {
            self.pipeline.aggregator_model = v;
        }
        if let Some(v) = get("LITERA_MINI_MODEL") {
            self.pipeline.mini_model = v;
        }
        if let Some(v) = get("LITERA_VARIANT") {
            self.pipeline.variant = v.parse().map_err(|message| ConfigError::Value {
                key: "LITERA_VARIANT".into(),
                message,
            })?;
        }
        if let Some(v) = get("LITERA_MAX_IN_FLIGHT") {
            self.pipeline.max_in_flight = v.parse().map_err(|e: std::num::ParseIntError| ConfigError::Value {
                key: "LITERA_MAX_IN_FLIGHT".into(),
                message: e.to_string(),
            })?;
        }
        if let Some(v) = get("LITERA_MOCK_SCRIPT") {
            self.mock_script = Some(v.into());
        }
        if let Some(v) = get("LITERA_CACHE_DIR") {
            self.cache_dir = Some(v.into());
        }
        if let Some(v) = get("LITERA_BIND") {
            self.service.bind = v;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.provider.validate()?;
        self.pipeline.validate().map_err(|message| ConfigError::Value {
            key: "pipeline".into(),
            message,
        })?;
        if self.service.trace_capacity == 0 {
            return Err(ConfigError::Value {
                key: "service.trace_capacity".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn prompts(&self) -> Result<PromptRegistry, ConfigError> {
        let reg = match &self.prompt_override_dir {
            Some(dir) => PromptRegistry::with_overrides(dir)?,
            None => PromptRegistry::builtin(),
        };
        reg.verify_checksums()?;
        Ok(reg)
    }

    pub fn client(&self) -> Result<LlmClient, ConfigError> {
        let client = match &self.mock_script {
            Some(path) => LlmClient::new(
                Arc::new(MockBackend::new(MockScript::from_file(path)?)),
                self.provider.retry_policy(),
            ),
            None => LlmClient::http(&self.provider)?,
        };
        let cache = match &self.cache_dir {
            Some(dir) => Some(ResponseCache::on_disk(dir).map_err(|source| ConfigError::Io {
                path: dir.clone(),
                source,
            })?),
            None if self.provider.cache_enabled => Some(ResponseCache::in_memory()),
            None => None,
        };
        Ok(match cache {
            Some(c) => client.with_cache(Arc::new(c)),
            None => client,
        })
    }

    pub fn pipeline(&self) -> Result<Pipeline, ConfigError> {
        self.validate()?;
        Ok(Pipeline::new(
            self.client()?,
            Arc::new(self.prompts()?),
            self.pipeline.clone(),
        )?)
    }
}
