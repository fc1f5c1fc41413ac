//! TOML configuration file.
//!
//! ```toml
//! mock = true
//!
//! [providers]
//! base_endpoint = "http://localhost:8000/generate"
//! base_model = "pegasus-legal"
//! api_key_env = "JUDGERAG_API_KEY"
//!
//! [chunk]
//! max_words = 200
//!
//! [rag]
//! k = 3
//!
//! [paths]
//! index = "work/summaries.idx"
//! ```
//!
//! Secrets never live in the file; `api_key_env` names the environment
//! variable that holds the key.

use std::path::{Path, PathBuf};
use std::time::Duration;
use std::sync::Arc;

use judgerag::chunker::ChunkParams;
use judgerag::providers::{Embedder, HttpEmbedder, HttpGenerator, Providers, TextGenerator};
use judgerag::rag::RagConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const DEFAULT_INDEX_PATH: &str = "judgerag.idx";
pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";
pub const DEFAULT_API_KEY_ENV: &str = "JUDGERAG_API_KEY";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub mock: bool,
    pub providers: ProviderConfig,
    pub chunk: ChunkParams,
    pub rag: RagConfig,
    pub paths: PathConfig,
    pub server: ServerConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub base_endpoint: Option<String>,
    pub base_model: Option<String>,
    pub finetuned_endpoint: Option<String>,
    pub finetuned_model: Option<String>,
    /// Falls back to the base endpoint and model.
    pub answer_endpoint: Option<String>,
    pub answer_model: Option<String>,
    /// Falls back to the base endpoint and model.
    pub annotation_endpoint: Option<String>,
    pub annotation_model: Option<String>,
    pub embedding_endpoint: Option<String>,
    pub embedding_model: Option<String>,
    pub embedding_dim: Option<usize>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: Option<String>,
    pub timeout_secs: Option<u64>,
    pub concurrency: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub index: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub annotations: Option<PathBuf>,
    pub summaries: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: Option<String>,
    pub ui_dir: Option<PathBuf>,
}

impl AppConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.chunk
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        self.rag
            .validate()
            .map_err(|e| CliError::config(e.to_string()))?;
        if !self.mock {
            let p = &self.providers;
            let required = [
                ("providers.base_endpoint", &p.base_endpoint),
                ("providers.base_model", &p.base_model),
                ("providers.finetuned_endpoint", &p.finetuned_endpoint),
                ("providers.finetuned_model", &p.finetuned_model),
                ("providers.embedding_endpoint", &p.embedding_endpoint),
                ("providers.embedding_model", &p.embedding_model),
            ];
            let missing: Vec<&str> = required
                .iter()
                .filter(|(_, v)| v.as_deref().is_none_or(|s| s.trim().is_empty()))
                .map(|(name, _)| *name)
                .collect();
            if !missing.is_empty() {
                return Err(CliError::config(format!(
                    "live mode needs {} (or run with --mock)",
                    missing.join(", ")
                )));
            }
            if p.embedding_dim.is_none_or(|d| d == 0) {
                return Err(CliError::config(
                    "live mode needs providers.embedding_dim (or run with --mock)",
                ));
            }
        }
        Ok(())
    }

    pub fn index_path(&self) -> PathBuf {
        self.paths
            .index
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_INDEX_PATH))
    }

    /// Builds the provider set; credentials are read from the environment.
    pub fn providers(&self) -> Result<Providers, CliError> {
        self.validate()?;
        if self.mock {
            return Ok(Providers::mock());
        }
        let p = &self.providers;
        let key_var = p.api_key_env.as_deref().unwrap_or(DEFAULT_API_KEY_ENV);
        let api_key = std::env::var(key_var).ok().filter(|k| !k.is_empty());
        let timeout = p.timeout_secs.map(Duration::from_secs);
        let cap = p.concurrency;
        let generator = |endpoint: &str, model: &str| -> Arc<dyn TextGenerator> {
            let mut g = HttpGenerator::new(endpoint, model).with_api_key(api_key.clone());
            if let Some(t) = timeout {
                g = g.with_timeout(t);
            }
            if let Some(c) = cap {
                g = g.with_concurrency_cap(c);
            }
            Arc::new(g)
        };
        let req = |v: &Option<String>| v.clone().unwrap_or_default();
        let base_endpoint = req(&p.base_endpoint);
        let base_model = req(&p.base_model);
        let or_base = |e: &Option<String>, m: &Option<String>| {
            (
                e.clone().unwrap_or_else(|| base_endpoint.clone()),
                m.clone().unwrap_or_else(|| base_model.clone()),
            )
        };
        let (answer_e, answer_m) = or_base(&p.answer_endpoint, &p.answer_model);
        let (annot_e, annot_m) = or_base(&p.annotation_endpoint, &p.annotation_model);

        let mut embedder = HttpEmbedder::new(
            req(&p.embedding_endpoint),
            req(&p.embedding_model),
            p.embedding_dim.unwrap_or_default(),
        )
        .with_api_key(api_key.clone());
        if let Some(t) = timeout {
            embedder = embedder.with_timeout(t);
        }
        if let Some(c) = cap {
            embedder = embedder.with_concurrency_cap(c);
        }
        let embedder: Arc<dyn Embedder> = Arc::new(embedder);
        Ok(Providers {
            base_generator: generator(&base_endpoint, &base_model),
            finetuned_generator: generator(&req(&p.finetuned_endpoint), &req(&p.finetuned_model)),
            answer_generator: generator(&answer_e, &answer_m),
            annotation_generator: generator(&annot_e, &annot_m),
            embedder,
        })
    }
}
