//! Two-step summarization and its ablation variants.
//!
//! The abstractive stage splits a judgment into sentence-bounded chunks and
//! asks a generator to summarize each one; the extractive stage keeps the
//! most central sentences of its input. Variants compose the stages in
//! either order, or use one of them alone.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{chunk_by_words, count_words, split_sentences, ChunkError, ChunkParams};
use crate::corpus::JudgmentDocument;
use crate::providers::{
    embed, generate, Embedder, FailureKind, GenerationRequest, ProviderError, Providers,
    TextGenerator,
};
use crate::vectordb::cosine_similarity;

/// Chunk summarization prompt, version 1.
pub const PROMPT_TEMPLATE_V1: &str = "Summarize the following excerpt of an Indian court judgment in 3 sentences, preserving parties, provisions, and outcome:\n\n{chunk}";
pub const CHUNK_PLACEHOLDER: &str = "{chunk}";

/// Fraction of sentences kept by the default extraction budget, in tenths.
const DEFAULT_BUDGET_TENTHS: usize = 3;

pub fn template_hash(template: &str) -> String {
    format!("crc32:{:08x}", crc32fast::hash(template.as_bytes()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StageOrder {
    ExtractiveOnly,
    AbstractiveOnly,
    ExtThenAbs,
    AbsThenExt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SummarizationVariant {
    pub order: StageOrder,
    /// Use the fine-tuned generator instead of the base one.
    pub fine_tuned: bool,
}

impl SummarizationVariant {
    pub const fn new(order: StageOrder, fine_tuned: bool) -> Self {
        // no generator is involved in extractive-only runs
        let fine_tuned = fine_tuned && !matches!(order, StageOrder::ExtractiveOnly);
        Self { order, fine_tuned }
    }

    /// The seven evaluated combinations, in report order.
    pub const fn ablation_set() -> [SummarizationVariant; 7] {
        use StageOrder::*;
        [
            Self::new(ExtractiveOnly, false),
            Self::new(AbstractiveOnly, false),
            Self::new(AbstractiveOnly, true),
            Self::new(ExtThenAbs, false),
            Self::new(ExtThenAbs, true),
            Self::new(AbsThenExt, false),
            Self::new(AbsThenExt, true),
        ]
    }

    /// Row label used in evaluation tables.
    pub fn label(&self) -> String {
        let base = match self.order {
            StageOrder::ExtractiveOnly => return "Extractive Summarization".into(),
            StageOrder::AbstractiveOnly => "Abstractive Summarization",
            StageOrder::ExtThenAbs => "Ext-Abs Summarization",
            StageOrder::AbsThenExt => "Abs-Ext Summarization",
        };
        let ft = if self.fine_tuned { "with FT" } else { "without FT" };
        format!("{base} ({ft})")
    }

    pub fn stages(&self) -> &'static [StageKind] {
        match self.order {
            StageOrder::ExtractiveOnly => &[StageKind::Extractive],
            StageOrder::AbstractiveOnly => &[StageKind::Abstractive],
            StageOrder::ExtThenAbs => &[StageKind::Extractive, StageKind::Abstractive],
            StageOrder::AbsThenExt => &[StageKind::Abstractive, StageKind::Extractive],
        }
    }
}

impl Default for SummarizationVariant {
    fn default() -> Self {
        Self::new(StageOrder::AbsThenExt, true)
    }
}

impl fmt::Display for SummarizationVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self.order {
            StageOrder::ExtractiveOnly => "extractive",
            StageOrder::AbstractiveOnly => "abstractive",
            StageOrder::ExtThenAbs => "ext-abs",
            StageOrder::AbsThenExt => "abs-ext",
        };
        f.write_str(name)?;
        if self.fine_tuned {
            f.write_str("-ft")?;
        }
        Ok(())
    }
}

impl FromStr for SummarizationVariant {
    type Err = String;

    /// Accepts the `Display` names, e.g. `abs-ext-ft` or `extractive`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        let (name, fine_tuned) = match lower.strip_suffix("-ft") {
            Some(n) => (n, true),
            None => (lower.as_str(), false),
        };
        let order = match name {
            "extractive" => StageOrder::ExtractiveOnly,
            "abstractive" => StageOrder::AbstractiveOnly,
            "ext-abs" => StageOrder::ExtThenAbs,
            "abs-ext" => StageOrder::AbsThenExt,
            _ => {
                return Err(format!(
                    "unknown variant `{s}` (expected extractive, abstractive[-ft], ext-abs[-ft] or abs-ext[-ft])"
                ))
            }
        };
        if fine_tuned && order == StageOrder::ExtractiveOnly {
            return Err("the extractive variant has no fine-tuned form".into());
        }
        Ok(Self::new(order, fine_tuned))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Abstractive,
    Extractive,
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StageKind::Abstractive => "abstractive",
            StageKind::Extractive => "extractive",
        })
    }
}

/// One executed stage. Lengths are in whitespace-delimited words.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: StageKind,
    pub provider: String,
    pub input_words: usize,
    pub output_words: usize,
    pub generation_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub template_hash: String,
    pub stages: Vec<StageRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub doc_id: String,
    pub variant: SummarizationVariant,
    pub text: String,
    pub stage_trace: StageTrace,
}

/// How many sentences the extractive stage keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExtractBudget {
    /// 30% of the input sentences, at least one.
    #[default]
    Default,
    Fixed(usize),
    /// Every sentence.
    All,
}

impl ExtractBudget {
    pub fn resolve(&self, text: &str) -> usize {
        match *self {
            ExtractBudget::Default => default_extract_budget(text),
            ExtractBudget::Fixed(n) => n.max(1),
            ExtractBudget::All => split_sentences(text).len().max(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummarizeParams {
    pub chunk: ChunkParams,
    pub budget: ExtractBudget,
    pub template: String,
    pub max_output_tokens: u32,
}

impl Default for SummarizeParams {
    fn default() -> Self {
        Self {
            chunk: ChunkParams::default(),
            budget: ExtractBudget::Default,
            template: PROMPT_TEMPLATE_V1.to_string(),
            max_output_tokens: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StageError {
    #[error("chunk {chunk} failed: {source}")]
    Generation {
        chunk: usize,
        #[source]
        source: ProviderError,
    },
    #[error("embedding failed: {0}")]
    Embedding(#[source] ProviderError),
    #[error(transparent)]
    Chunking(#[from] ChunkError),
    #[error("invalid extraction budget {0}")]
    InvalidBudget(usize),
    #[error("prompt template lacks the {{chunk}} placeholder")]
    BadTemplate,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{stage} stage failed for `{doc_id}`: {source}")]
pub struct SummarizeError {
    pub doc_id: String,
    pub stage: StageKind,
    #[source]
    pub source: StageError,
}

/// `ceil(0.3 * sentences)`, at least 1.
pub fn default_extract_budget(text: &str) -> usize {
    let n = split_sentences(text).len();
    ((n * DEFAULT_BUDGET_TENTHS).div_ceil(10)).max(1)
}

fn fill_template(template: &str, chunk: &str) -> String {
    template.replace(CHUNK_PLACEHOLDER, chunk)
}

/// Summarizes each word chunk with one generation call and joins the
/// results in chunk order. Returns the text and the number of calls.
pub fn run_abstractive(
    doc_text: &str,
    provider: &dyn TextGenerator,
    params: &SummarizeParams,
) -> Result<(String, usize), StageError> {
    if !params.template.contains(CHUNK_PLACEHOLDER) {
        return Err(StageError::BadTemplate);
    }
    let sentences = split_sentences(doc_text);
    let chunks = chunk_by_words(
        "",
        &sentences,
        params.chunk.max_words,
        params.chunk.overlap_sentences,
    )?;
    if chunks.is_empty() {
        return Ok((String::new(), 0));
    }

    let requests: Vec<GenerationRequest> = chunks
        .iter()
        .map(|c| {
            GenerationRequest::new(
                fill_template(&params.template, &c.text),
                params.max_output_tokens.max(1),
                0.0,
            )
        })
        .collect::<Result<_, FailureKind>>()
        .map_err(|kind| StageError::Generation {
            chunk: 0,
            source: ProviderError::immediate(kind),
        })?;

    let results: Vec<Mutex<Option<Result<String, ProviderError>>>> =
        requests.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = provider.concurrency_cap().clamp(1, requests.len());
    thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= requests.len() {
                    break;
                }
                let out = generate(provider, &requests[i]);
                *results[i].lock().expect("result slot") = Some(out);
            });
        }
    });

    let mut parts = Vec::with_capacity(results.len());
    for (chunk, slot) in results.into_iter().enumerate() {
        let out = slot
            .into_inner()
            .expect("result slot")
            .expect("every chunk was processed");
        match out {
            Ok(text) => parts.push(text.trim().to_string()),
            Err(source) => return Err(StageError::Generation { chunk, source }),
        }
    }
    Ok((parts.join(" "), chunks.len()))
}

pub fn abstractive_stage(
    doc_text: &str,
    provider: &dyn TextGenerator,
    params: &SummarizeParams,
) -> Result<String, StageError> {
    run_abstractive(doc_text, provider, params).map(|(text, _)| text)
}

/// Picks the sentences that best represent a text.
pub trait SentenceExtractor: Send + Sync {
    fn id(&self) -> String;

    fn extract(&self, text: &str, budget_sentences: usize) -> Result<String, StageError>;
}

/// Scores each sentence by its mean cosine similarity to every other
/// sentence and keeps the top `budget`, in source order. Ties go to the
/// earlier sentence.
pub struct CentralityExtractor<'a> {
    embedder: &'a dyn Embedder,
}

impl<'a> CentralityExtractor<'a> {
    pub fn new(embedder: &'a dyn Embedder) -> Self {
        Self { embedder }
    }

    /// Mean similarity of each sentence to the others.
    pub fn centrality(&self, sentences: &[&str]) -> Result<Vec<f64>, StageError> {
        let vectors = embed(self.embedder, sentences).map_err(StageError::Embedding)?;
        let n = vectors.len();
        if n < 2 {
            return Ok(vec![0.0; n]);
        }
        let mut scores = vec![0.0; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let sim = cosine_similarity(&vectors[i], &vectors[j]).map_err(|e| {
                    StageError::Embedding(ProviderError::immediate(FailureKind::InvalidVector(
                        e.to_string(),
                    )))
                })?;
                scores[i] += sim;
                scores[j] += sim;
            }
        }
        let others = (n - 1) as f64;
        Ok(scores.into_iter().map(|s| s / others).collect())
    }
}

impl SentenceExtractor for CentralityExtractor<'_> {
    fn id(&self) -> String {
        format!("centrality:{}", self.embedder.fingerprint().provider_id)
    }

    fn extract(&self, text: &str, budget_sentences: usize) -> Result<String, StageError> {
        if budget_sentences == 0 {
            return Err(StageError::InvalidBudget(0));
        }
        let sentences = split_sentences(text);
        if sentences.len() <= budget_sentences {
            return Ok(text.to_string());
        }
        let texts: Vec<&str> = sentences.iter().map(|s| s.text.as_str()).collect();
        let scores = self.centrality(&texts)?;
        let mut order: Vec<usize> = (0..texts.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut keep: Vec<usize> = order.into_iter().take(budget_sentences).collect();
        keep.sort_unstable();
        Ok(keep
            .into_iter()
            .map(|i| texts[i])
            .collect::<Vec<_>>()
            .join(" "))
    }
}

pub fn extractive_stage(
    text: &str,
    budget_sentences: usize,
    embedder: &dyn Embedder,
) -> Result<String, StageError> {
    CentralityExtractor::new(embedder).extract(text, budget_sentences)
}

/// Runs `variant` over one document with the default centrality extractor.
pub fn summarize_document(
    doc: &JudgmentDocument,
    variant: SummarizationVariant,
    providers: &Providers,
    params: &SummarizeParams,
) -> Result<Summary, SummarizeError> {
    let extractor = CentralityExtractor::new(providers.embedder.as_ref());
    summarize_with(doc, variant, providers.summarizer(variant.fine_tuned), &extractor, params)
}

pub fn summarize_with(
    doc: &JudgmentDocument,
    variant: SummarizationVariant,
    generator: &dyn TextGenerator,
    extractor: &dyn SentenceExtractor,
    params: &SummarizeParams,
) -> Result<Summary, SummarizeError> {
    let mut text = doc.text.clone();
    let mut stages = Vec::new();
    for &stage in variant.stages() {
        let fail = |source| SummarizeError {
            doc_id: doc.doc_id.clone(),
            stage,
            source,
        };
        let input_words = count_words(&text);
        let (output, provider, calls) = match stage {
            StageKind::Abstractive => {
                let (out, calls) = run_abstractive(&text, generator, params).map_err(fail)?;
                (out, generator.id().to_string(), calls)
            }
            StageKind::Extractive => {
                let budget = params.budget.resolve(&text);
                let out = extractor.extract(&text, budget).map_err(fail)?;
                (out, extractor.id(), 0)
            }
        };
        stages.push(StageRecord {
            stage,
            provider,
            input_words,
            output_words: count_words(&output),
            generation_calls: calls,
        });
        text = output;
    }
    Ok(Summary {
        doc_id: doc.doc_id.clone(),
        variant,
        text,
        stage_trace: StageTrace {
            template_hash: template_hash(&params.template),
            stages,
        },
    })
}
