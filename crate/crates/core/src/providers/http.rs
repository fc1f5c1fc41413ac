//! JSON-over-HTTP clients for externally served models.
//!
//! Generation: `POST {endpoint}` with `{"model", "prompt", "params"}`, answered
//! by `{"text"}`. Embedding: `POST {endpoint}` with `{"model", "texts",
//! "params"}`, answered by `{"vectors"}`.

use std::time::Duration;

use serde::Deserialize;
use serde_json::json;

use super::{
    EmbeddingFingerprint, EmbeddingVector, Embedder, FailureKind, GenerationRequest, RetryPolicy,
    TextGenerator, DEFAULT_CONCURRENCY_CAP,
};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

fn agent(timeout: Duration) -> ureq::Agent {
    let config = ureq::Agent::config_builder()
        .timeout_global(Some(timeout))
        .http_status_as_error(false)
        .build();
    ureq::Agent::new_with_config(config)
}

fn classify(err: ureq::Error) -> FailureKind {
    match err {
        ureq::Error::Timeout(_) => FailureKind::Timeout,
        ureq::Error::Io(e) if e.kind() == std::io::ErrorKind::TimedOut => FailureKind::Timeout,
        ureq::Error::StatusCode(status) => FailureKind::Provider {
            status: Some(status),
            message: "error status".into(),
        },
        ureq::Error::Json(e) => FailureKind::Provider {
            status: None,
            message: format!("malformed response body: {e}"),
        },
        other => FailureKind::Transport(other.to_string()),
    }
}

fn post_json<T: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    endpoint: &str,
    api_key: Option<&str>,
    body: &serde_json::Value,
) -> Result<T, FailureKind> {
    let mut req = agent.post(endpoint);
    if let Some(key) = api_key {
        req = req.header("Authorization", &format!("Bearer {key}"));
    }
    let mut resp = req.send_json(body).map_err(classify)?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        let message = resp
            .body_mut()
            .read_to_string()
            .unwrap_or_default()
            .chars()
            .take(512)
            .collect();
        return Err(FailureKind::Provider {
            status: Some(status),
            message,
        });
    }
    resp.body_mut().read_json::<T>().map_err(classify)
}

#[derive(Deserialize)]
struct GenerationResponse {
    text: String,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    vectors: Vec<Vec<f64>>,
}

#[derive(Debug)]
pub struct HttpGenerator {
    id: String,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
    cap: usize,
}

impl HttpGenerator {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        let endpoint = endpoint.into();
        let model = model.into();
        Self {
            id: format!("http:{model}"),
            endpoint,
            model,
            api_key: None,
            agent: agent(DEFAULT_TIMEOUT),
            retry: RetryPolicy::default(),
            cap: DEFAULT_CONCURRENCY_CAP,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = agent(timeout);
        self
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_concurrency_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }
}

impl TextGenerator for HttpGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind> {
        let body = json!({
            "model": self.model,
            "prompt": request.prompt,
            "params": {
                "max_output_tokens": request.max_output_tokens,
                "temperature": request.temperature,
            },
        });
        let resp: GenerationResponse =
            post_json(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)?;
        Ok(resp.text)
    }

    fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    fn concurrency_cap(&self) -> usize {
        self.cap
    }
}

#[derive(Debug)]
pub struct HttpEmbedder {
    endpoint: String,
    model: String,
    dim: usize,
    api_key: Option<String>,
    agent: ureq::Agent,
    retry: RetryPolicy,
    cap: usize,
}

impl HttpEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dim: usize) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
            api_key: None,
            agent: agent(DEFAULT_TIMEOUT),
            retry: RetryPolicy::default(),
            cap: DEFAULT_CONCURRENCY_CAP,
        }
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.agent = agent(timeout);
        self
    }

    pub fn with_retry_policy(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_concurrency_cap(mut self, cap: usize) -> Self {
        self.cap = cap.max(1);
        self
    }
}

impl Embedder for HttpEmbedder {
    fn fingerprint(&self) -> EmbeddingFingerprint {
        EmbeddingFingerprint {
            provider_id: format!("http:{}", self.model),
            dim: self.dim,
            seed: 0,
        }
    }

    fn embed_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<f64>>, FailureKind> {
        let body = json!({ "model": self.model, "texts": texts, "params": {} });
        let resp: EmbeddingResponse =
            post_json(&self.agent, &self.endpoint, self.api_key.as_deref(), &body)?;
        resp.vectors.into_iter().map(EmbeddingVector::new).collect()
    }

    fn retry_policy(&self) -> RetryPolicy {
        self.retry
    }

    fn concurrency_cap(&self) -> usize {
        self.cap
    }
}
