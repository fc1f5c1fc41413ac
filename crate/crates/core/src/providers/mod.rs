//! Text-generation and embedding provider interfaces.
//!
//! Concrete models live behind [`TextGenerator`] and [`Embedder`]. The
//! [`generate`] and [`embed`] entry points add request validation and the
//! bounded retry policy on top of a provider's single-attempt call.

mod http;
pub mod mock;

use std::fmt;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

pub use http::{HttpEmbedder, HttpGenerator};

/// Default number of concurrent calls a client allows.
pub const DEFAULT_CONCURRENCY_CAP: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub prompt: String,
    pub max_output_tokens: u32,
    pub temperature: f64,
}

impl GenerationRequest {
    pub fn new(
        prompt: impl Into<String>,
        max_output_tokens: u32,
        temperature: f64,
    ) -> Result<Self, FailureKind> {
        let prompt = prompt.into();
        if prompt.trim().is_empty() {
            return Err(FailureKind::InvalidRequest("prompt is empty".into()));
        }
        if max_output_tokens == 0 {
            return Err(FailureKind::InvalidRequest(
                "max_output_tokens must be at least 1".into(),
            ));
        }
        if !(temperature.is_finite() && temperature >= 0.0) {
            return Err(FailureKind::InvalidRequest(
                "temperature must be a non-negative number".into(),
            ));
        }
        Ok(Self {
            prompt,
            max_output_tokens,
            temperature,
        })
    }

    /// A request with the defaults used by the pipeline stages.
    pub fn with_prompt(prompt: impl Into<String>) -> Result<Self, FailureKind> {
        Self::new(prompt, 512, 0.0)
    }
}

/// A fixed-length real vector produced by an embedding model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct EmbeddingVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Fails when `values` is empty or holds a non-finite entry.
    pub fn new(values: Vec<T>) -> Result<Self, FailureKind> {
        if values.is_empty() {
            return Err(FailureKind::InvalidVector("zero-length vector".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FailureKind::InvalidVector(format!(
                "component {i} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector {
            values: self
                .values
                .iter()
                .map(|v| U::from_f64_lossy(v.to_f64_lossy()))
                .collect(),
        }
    }
}

/// Identity of the embedding model that produced an index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EmbeddingFingerprint {
    pub provider_id: String,
    pub dim: usize,
    /// Hash seed of a mock embedder, zero for real models.
    pub seed: u64,
}

impl fmt::Display for EmbeddingFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/dim={}/seed={:#x}", self.provider_id, self.dim, self.seed)
    }
}

/// Cause of a single failed provider attempt.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FailureKind {
    #[error("request timed out")]
    Timeout,
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("provider error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider { status: Option<u16>, message: String },
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid vector: {0}")]
    InvalidVector(String),
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("expected {expected} vectors, got {actual}")]
    CountMismatch { expected: usize, actual: usize },
    #[error("text has no hashable features")]
    ZeroFeatures,
}

impl FailureKind {
    /// Whether another attempt could succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            FailureKind::Timeout
                | FailureKind::Transport(_)
                | FailureKind::EmptyCompletion
                | FailureKind::Provider { status: None, .. }
        ) || matches!(self, FailureKind::Provider { status: Some(s), .. } if *s == 429 || *s >= 500)
    }
}

/// A provider failure together with the number of attempts made.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} (after {attempts} attempt(s))")]
pub struct ProviderError {
    pub kind: FailureKind,
    pub attempts: u32,
}

impl ProviderError {
    pub fn immediate(kind: FailureKind) -> Self {
        Self { kind, attempts: 0 }
    }
}

/// Bounded retry with exponential backoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub multiplier: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            initial_backoff: Duration::from_millis(500),
            multiplier: 2,
        }
    }
}

impl RetryPolicy {
    /// Same attempt count, no sleeping between attempts.
    pub fn immediate() -> Self {
        Self {
            initial_backoff: Duration::ZERO,
            ..Self::default()
        }
    }

    pub fn backoff_before(&self, attempt: u32) -> Duration {
        // attempt is 1-based; nothing to wait before the first one.
        if attempt <= 1 {
            return Duration::ZERO;
        }
        let factor = self.multiplier.saturating_pow(attempt - 2);
        self.initial_backoff.saturating_mul(factor)
    }

    pub fn run<T>(
        &self,
        mut op: impl FnMut() -> Result<T, FailureKind>,
    ) -> Result<T, ProviderError> {
        let max = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            let wait = self.backoff_before(attempt);
            if !wait.is_zero() {
                thread::sleep(wait);
            }
            match op() {
                Ok(v) => return Ok(v),
                Err(kind) if kind.is_retryable() && attempt < max => {
                    log::debug!("provider attempt {attempt} failed: {kind}; retrying");
                    attempt += 1;
                }
                Err(kind) => {
                    return Err(ProviderError {
                        kind,
                        attempts: attempt,
                    })
                }
            }
        }
    }
}

/// A text-generation model.
pub trait TextGenerator: Send + Sync {
    /// Stable identifier recorded in traces.
    fn id(&self) -> &str;

    /// One attempt, no retries.
    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind>;

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::default()
    }

    fn concurrency_cap(&self) -> usize {
        DEFAULT_CONCURRENCY_CAP
    }
}

/// An embedding model with a fixed output dimension.
pub trait Embedder: Send + Sync {
    fn fingerprint(&self) -> EmbeddingFingerprint;

    fn dim(&self) -> usize {
        self.fingerprint().dim
    }

    /// One attempt over a batch, no retries.
    fn embed_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<f64>>, FailureKind>;

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::default()
    }

    fn concurrency_cap(&self) -> usize {
        DEFAULT_CONCURRENCY_CAP
    }
}

/// Runs a generation request under the provider's retry policy.
///
/// Whitespace-only completions count as [`FailureKind::EmptyCompletion`].
pub fn generate(
    provider: &dyn TextGenerator,
    request: &GenerationRequest,
) -> Result<String, ProviderError> {
    provider.retry_policy().run(|| {
        let text = provider.generate_once(request)?;
        if text.trim().is_empty() {
            Err(FailureKind::EmptyCompletion)
        } else {
            Ok(text)
        }
    })
}

/// Embeds `texts` in order, checking count and dimension of the result.
pub fn embed(
    provider: &dyn Embedder,
    texts: &[&str],
) -> Result<Vec<EmbeddingVector<f64>>, ProviderError> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
        return Err(ProviderError::immediate(FailureKind::InvalidRequest(
            format!("text {i} is empty"),
        )));
    }
    let dim = provider.dim();
    provider.retry_policy().run(|| {
        let vectors = provider.embed_once(texts)?;
        if vectors.len() != texts.len() {
            return Err(FailureKind::CountMismatch {
                expected: texts.len(),
                actual: vectors.len(),
            });
        }
        if let Some(v) = vectors.iter().find(|v| v.dim() != dim) {
            return Err(FailureKind::DimensionMismatch {
                expected: dim,
                actual: v.dim(),
            });
        }
        Ok(vectors)
    })
}

/// Every model the pipeline may call.
#[derive(Clone)]
pub struct Providers {
    /// Summarizer without domain fine-tuning.
    pub base_generator: std::sync::Arc<dyn TextGenerator>,
    /// Summarizer fine-tuned on headnotes.
    pub finetuned_generator: std::sync::Arc<dyn TextGenerator>,
    /// Answer generator for retrieval queries.
    pub answer_generator: std::sync::Arc<dyn TextGenerator>,
    /// Structured-field extractor for annotation runs.
    pub annotation_generator: std::sync::Arc<dyn TextGenerator>,
    pub embedder: std::sync::Arc<dyn Embedder>,
}

impl Providers {
    /// All-mock provider set with the default embedding dimension.
    pub fn mock() -> Self {
        Self::mock_with_dim(mock::DEFAULT_MOCK_DIM)
    }

    pub fn mock_with_dim(dim: usize) -> Self {
        use std::sync::Arc;
        Self {
            base_generator: Arc::new(mock::LeadGenerator::base()),
            finetuned_generator: Arc::new(mock::LeadGenerator::finetuned()),
            answer_generator: Arc::new(mock::OverviewGenerator),
            annotation_generator: Arc::new(mock::AnnotationGenerator),
            embedder: Arc::new(mock::HashEmbedder::new(dim).expect("mock dim is valid")),
        }
    }

    pub fn summarizer(&self, fine_tuned: bool) -> &dyn TextGenerator {
        if fine_tuned {
            self.finetuned_generator.as_ref()
        } else {
            self.base_generator.as_ref()
        }
    }
}
