//! TOML configuration file. Sections mirror the CLI subcommands and their
//! flags; command-line values win over the file. The API key is read from the
//! file's `[backend]` section and overridden by the environment.

use std::path::{Path, PathBuf};

use counsel_core::prompt::GenerationConfig;
use counsel_llm::{BackendEndpoint, BackoffPolicy, Dialect, API_KEY_ENV};
use serde::Deserialize;

use crate::error::{read_text, HarnessError};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub backend: BackendSection,
    #[serde(default)]
    pub generation: Option<GenerationConfig>,
    #[serde(default)]
    pub serve: ServeSection,
    #[serde(default)]
    pub compete: CompeteSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
    #[serde(default)]
    pub metrics: MetricsSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackendSection {
    pub dialect: Option<Dialect>,
    pub timeout_ms: Option<u64>,
    pub max_retries: Option<u32>,
    pub backoff_initial_ms: Option<u64>,
    pub backoff_max_ms: Option<u64>,
    pub api_key: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    pub host: Option<String>,
    pub port: Option<u16>,
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub mock: Option<bool>,
    pub scaffold: Option<PathBuf>,
    pub window: Option<usize>,
    pub data_dir: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub exemplar_seed: Option<u64>,
    pub exemplars_per_subprocess: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompeteSection {
    pub scenarios: Option<PathBuf>,
    pub variants: Option<Vec<u8>>,
    pub backend_url: Option<String>,
    pub model: Option<String>,
    pub mock: Option<bool>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub scaffold: Option<PathBuf>,
    pub parallelism: Option<usize>,
    pub exemplars_per_subprocess: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluateSection {
    pub run_dir: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub transcript: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::parse(&read_text(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn generation(&self) -> GenerationConfig {
        self.generation.clone().unwrap_or_default()
    }

    /// Endpoint for `url`/`model` with the `[backend]` settings applied and
    /// the environment key, when set, taking precedence.
    pub fn endpoint(&self, url: &str, model: &str) -> Result<BackendEndpoint, HarnessError> {
        self.endpoint_with_env(url, model, std::env::var(API_KEY_ENV).ok())
    }

    pub fn endpoint_with_env(
        &self,
        url: &str,
        model: &str,
        env_key: Option<String>,
    ) -> Result<BackendEndpoint, HarnessError> {
        let b = &self.backend;
        let mut e = BackendEndpoint::new(url, model);
        if let Some(d) = b.dialect {
            e.dialect = d;
        }
        if let Some(t) = b.timeout_ms {
            e.timeout_ms = t;
        }
        if let Some(r) = b.max_retries {
            e.max_retries = r;
        }
        let defaults = BackoffPolicy::default();
        e.backoff = BackoffPolicy {
            initial_ms: b.backoff_initial_ms.unwrap_or(defaults.initial_ms),
            max_ms: b.backoff_max_ms.unwrap_or(defaults.max_ms),
        };
        e.api_key = env_key.filter(|k| !k.trim().is_empty()).or_else(|| b.api_key.clone());
        e.validate().map_err(|err| HarnessError::Config(err.to_string()))?;
        Ok(e)
    }
}
