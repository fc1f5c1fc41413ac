//! Retrieval-augmented answering over an index of judgment summaries.
//!
//! A query is embedded with the same model that built the index, the top
//! `k` chunks are packed into a numbered-context prompt, and the answer
//! generator's reply is parsed into per-case overviews. If generation fails
//! the retrieved evidence is still returned, flagged as degraded.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunker::{chunk_by_tokens, ChunkError, ChunkParams, SimpleTokenizer, Tokenizer};
use crate::corpus::{AnnotationRecord, AnnotationStore};
use crate::providers::{
    embed, generate, Embedder, EmbeddingFingerprint, GenerationRequest, ProviderError, Providers,
};
use crate::vectordb::{Metadata, MetadataFilter, SearchHit, VectorDbError, VectorIndex};

/// Instruction footer, version 1.
pub const ANSWER_FOOTER_V1: &str = "Using only the context above, list each relevant case as: CASE:/DATE:/OUTCOME:/CITATIONS:/PROVISIONS:/SUMMARY:. Then answer the question.";
pub const PROMPT_TEMPLATE_VERSION: &str = "1";

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_CONTEXT_TOKENS: usize = 4096;
pub const MIN_CONTEXT_TOKENS: usize = 256;
const ANSWER_MAX_OUTPUT_TOKENS: u32 = 1024;
/// A truncated block must keep at least this many excerpt tokens.
const MIN_EXCERPT_TOKENS: usize = 16;

/// Metadata keys written by [`build_index`].
pub const META_DOC_ID: &str = "doc_id";
pub const META_CASE_NAME: &str = "case_name";
pub const META_CASE_TYPE: &str = "case_type";
pub const META_DATE: &str = "date";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RagConfig {
    pub k: usize,
    pub max_context_tokens: usize,
    pub prompt_template_version: String,
    pub answer_language: String,
}

impl Default for RagConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_context_tokens: DEFAULT_MAX_CONTEXT_TOKENS,
            prompt_template_version: PROMPT_TEMPLATE_VERSION.into(),
            answer_language: "en".into(),
        }
    }
}

impl RagConfig {
    pub fn validate(&self) -> Result<(), RagError> {
        if self.k == 0 {
            return Err(RagError::InvalidConfig("k must be at least 1".into()));
        }
        if self.max_context_tokens < MIN_CONTEXT_TOKENS {
            return Err(RagError::InvalidConfig(format!(
                "max_context_tokens must be at least {MIN_CONTEXT_TOKENS}"
            )));
        }
        if self.prompt_template_version != PROMPT_TEMPLATE_VERSION {
            return Err(RagError::InvalidConfig(format!(
                "unknown prompt template version `{}`",
                self.prompt_template_version
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RagError {
    #[error("invalid retrieval settings: {0}")]
    InvalidConfig(String),
    #[error("query is empty")]
    EmptyQuery,
    #[error("the index is empty")]
    EmptyIndex,
    #[error("index was built with embedder {index} but the configured embedder is {configured}")]
    FingerprintMismatch {
        index: String,
        configured: String,
    },
    #[error("embedding failed: {0}")]
    Embedding(#[source] ProviderError),
    #[error(transparent)]
    Index(#[from] VectorDbError),
    #[error(transparent)]
    Chunking(#[from] ChunkError),
    #[error("no context block fits in {budget} tokens")]
    ContextBudget { budget: usize },
}

/// One case listed in a generated answer, tied to a retrieved document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedCase {
    pub doc_id: String,
    pub case_name: String,
    pub date: String,
    pub outcome: String,
    pub citations: Vec<String>,
    pub provisions: Vec<String>,
    pub judgment_summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOverview {
    pub query: String,
    pub answer_text: String,
    pub cited_cases: Vec<CitedCase>,
    pub retrieved: Vec<SearchHit<f64>>,
    /// Set when the answer could not be generated or parsed.
    pub degraded: bool,
    pub parse_miss: bool,
    pub generation_error: Option<String>,
}

/// Wall-clock milliseconds spent in each step of [`answer_query_timed`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QueryTiming {
    pub embed_ms: f64,
    pub search_ms: f64,
    pub generate_ms: f64,
}

/// A case block as written by the generator, before it is matched to
/// retrieved evidence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedCase {
    pub case_name: String,
    pub date: String,
    pub outcome: String,
    pub citations: Vec<String>,
    pub provisions: Vec<String>,
    pub judgment_summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParsedOverview {
    pub cases: Vec<ParsedCase>,
    pub parse_miss: bool,
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Reads `CASE:` / `DATE:` / `OUTCOME:` / `CITATIONS:` / `PROVISIONS:` /
/// `SUMMARY:` groups. Each `CASE:` line opens a group; unlabeled lines are
/// ignored, so prose around the groups is tolerated.
pub fn parse_overview(generated_text: &str) -> ParsedOverview {
    const LABELS: [&str; 6] = ["CASE", "DATE", "OUTCOME", "CITATIONS", "PROVISIONS", "SUMMARY"];
    let mut cases: Vec<ParsedCase> = Vec::new();
    for line in generated_text.lines() {
        let line = line.trim().trim_start_matches(['-', '*', ' ']);
        let Some((label, value)) = line.split_once(':') else {
            continue;
        };
        let label = label.trim().trim_end_matches('*').to_ascii_uppercase();
        if !LABELS.contains(&label.as_str()) {
            continue;
        }
        let value = value.trim().trim_start_matches('*').trim();
        if label == "CASE" {
            cases.push(ParsedCase {
                case_name: value.to_string(),
                ..Default::default()
            });
            continue;
        }
        let Some(case) = cases.last_mut() else {
            continue;
        };
        match label.as_str() {
            "DATE" => case.date = value.to_string(),
            "OUTCOME" => case.outcome = value.to_string(),
            "CITATIONS" => case.citations = split_list(value),
            "PROVISIONS" => case.provisions = split_list(value),
            _ => case.judgment_summary = value.to_string(),
        }
    }
    cases.retain(|c| !c.case_name.is_empty());
    ParsedOverview {
        parse_miss: cases.is_empty(),
        cases,
    }
}

fn header_lines(hit: &SearchHit<f64>, record: Option<&AnnotationRecord>) -> Vec<String> {
    let mut lines = Vec::new();
    let mut field = |label: &str, value: &str| {
        let value = value.trim();
        if !value.is_empty() {
            lines.push(format!("{label}: {}", value.replace('\n', " ")));
        }
    };
    match record {
        Some(r) => {
            field("Case", &r.case_name);
            field("Date", &r.date.to_string());
            field("Case type", &r.case_type);
            field("Outcome", &r.outcome_of_appellant);
            field("Citations", &r.citations.join("; "));
            field("Provisions", &r.related_provisions.join("; "));
        }
        None => {
            let meta = |k: &str| hit.metadata.get(k).map(String::as_str).unwrap_or("");
            field("Case", meta(META_CASE_NAME));
            field("Date", meta(META_DATE));
            field("Case type", meta(META_CASE_TYPE));
        }
    }
    lines
}

/// Keeps the first `budget` tokens of `text`, cut at a token boundary.
fn truncate_tokens(text: &str, budget: usize) -> &str {
    let spans = SimpleTokenizer.token_spans(text);
    if budget == 0 {
        ""
    } else if budget >= spans.len() {
        text
    } else {
        &text[..spans[budget - 1].end]
    }
}

/// Builds the answer prompt: numbered context blocks in hit order, then the
/// question and the instruction footer. Blocks are packed into
/// `max_context_tokens`; the first block that does not fit is truncated if
/// enough of its excerpt survives, and every later block is dropped.
pub fn assemble_prompt(
    query: &str,
    hits: &[SearchHit<f64>],
    annotations: Option<&AnnotationStore>,
    config: &RagConfig,
) -> Result<String, RagError> {
    let tok = SimpleTokenizer;
    let mut remaining = config.max_context_tokens;
    let mut blocks = Vec::new();
    for (i, hit) in hits.iter().enumerate() {
        let record = annotations.and_then(|a| a.get(&hit.chunk.doc_id));
        let mut head = vec![format!("[{}] doc_id: {}", i + 1, hit.chunk.doc_id)];
        head.extend(header_lines(hit, record));
        head.push("Excerpt:".into());
        let head = head.join("\n");
        let head_cost = tok.count_tokens(&head);
        let excerpt = hit.chunk.text.trim();
        let excerpt_cost = tok.count_tokens(excerpt);
        if head_cost + excerpt_cost <= remaining {
            remaining -= head_cost + excerpt_cost;
            blocks.push(format!("{head}\n{excerpt}"));
            continue;
        }
        let room = remaining.saturating_sub(head_cost);
        if room >= MIN_EXCERPT_TOKENS {
            blocks.push(format!("{head}\n{}", truncate_tokens(excerpt, room)));
        }
        break;
    }
    if blocks.is_empty() {
        return Err(RagError::ContextBudget {
            budget: config.max_context_tokens,
        });
    }
    let question = query.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut prompt = format!(
        "Context:\n\n{}\n\nQuestion: {question}\n\n{ANSWER_FOOTER_V1}",
        blocks.join("\n\n")
    );
    if config.answer_language != "en" {
        prompt.push_str(&format!(" Answer in {}.", config.answer_language));
    }
    Ok(prompt)
}

fn normalize_name(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Matches each parsed case to a retrieved document by doc id or case
/// name. Cases that match nothing retrieved are dropped.
pub fn resolve_cited_cases(
    parsed: &[ParsedCase],
    hits: &[SearchHit<f64>],
    annotations: Option<&AnnotationStore>,
) -> Vec<CitedCase> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for case in parsed {
        let wanted = normalize_name(&case.case_name);
        let found = hits.iter().map(|h| &h.chunk.doc_id).find(|doc_id| {
            let annotated = annotations
                .and_then(|a| a.get(doc_id))
                .map(|r| normalize_name(&r.case_name));
            let indexed = hits
                .iter()
                .find(|h| &h.chunk.doc_id == *doc_id)
                .and_then(|h| h.metadata.get(META_CASE_NAME))
                .map(|n| normalize_name(n));
            normalize_name(doc_id) == wanted
                || annotated.as_deref() == Some(wanted.as_str())
                || indexed.as_deref() == Some(wanted.as_str())
        });
        match found {
            Some(doc_id) if seen.insert(doc_id.clone()) => out.push(CitedCase {
                doc_id: doc_id.clone(),
                case_name: case.case_name.clone(),
                date: case.date.clone(),
                outcome: case.outcome.clone(),
                citations: case.citations.clone(),
                provisions: case.provisions.clone(),
                judgment_summary: case.judgment_summary.clone(),
            }),
            Some(_) => {}
            None => log::debug!("dropping untraceable case `{}`", case.case_name),
        }
    }
    out
}

fn check_fingerprint(index: &VectorIndex<f64>, embedder: &dyn Embedder) -> Result<(), RagError> {
    let configured: EmbeddingFingerprint = embedder.fingerprint();
    match index.fingerprint() {
        Some(fp) if *fp != configured => Err(RagError::FingerprintMismatch {
            index: fp.to_string(),
            configured: configured.to_string(),
        }),
        None if index.dim() != Some(configured.dim) => Err(RagError::FingerprintMismatch {
            index: format!("unknown (dim {:?})", index.dim()),
            configured: configured.to_string(),
        }),
        _ => Ok(()),
    }
}

pub fn answer_query(
    query: &str,
    index: &VectorIndex<f64>,
    providers: &Providers,
    annotations: Option<&AnnotationStore>,
    config: &RagConfig,
) -> Result<CaseOverview, RagError> {
    answer_query_timed(query, index, providers, annotations, config, None).map(|(o, _)| o)
}

/// [`answer_query`] with an optional metadata filter, also reporting how
/// long each step took.
pub fn answer_query_timed(
    query: &str,
    index: &VectorIndex<f64>,
    providers: &Providers,
    annotations: Option<&AnnotationStore>,
    config: &RagConfig,
    filter: Option<&MetadataFilter>,
) -> Result<(CaseOverview, QueryTiming), RagError> {
    config.validate()?;
    if query.trim().is_empty() {
        return Err(RagError::EmptyQuery);
    }
    if index.is_empty() {
        return Err(RagError::EmptyIndex);
    }
    let embedder = providers.embedder.as_ref();
    check_fingerprint(index, embedder)?;
    let mut timing = QueryTiming::default();
    let ms = |t: Instant| t.elapsed().as_secs_f64() * 1000.0;

    let t = Instant::now();
    let q = embed(embedder, &[query])
        .map_err(RagError::Embedding)?
        .pop()
        .expect("one vector per text");
    timing.embed_ms = ms(t);

    let t = Instant::now();
    let retrieved = index.top_k(&q, config.k, filter)?;
    timing.search_ms = ms(t);

    let mut overview = CaseOverview {
        query: query.to_string(),
        answer_text: String::new(),
        cited_cases: Vec::new(),
        retrieved,
        degraded: false,
        parse_miss: false,
        generation_error: None,
    };
    if overview.retrieved.is_empty() {
        overview.degraded = true;
        overview.generation_error = Some("no indexed chunk matched the filters".into());
        return Ok((overview, timing));
    }

    let prompt = assemble_prompt(query, &overview.retrieved, annotations, config)?;
    let t = Instant::now();
    let reply = GenerationRequest::new(prompt, ANSWER_MAX_OUTPUT_TOKENS, 0.0)
        .map_err(ProviderError::immediate)
        .and_then(|req| generate(providers.answer_generator.as_ref(), &req));
    timing.generate_ms = ms(t);

    match reply {
        Ok(text) => {
            let parsed = parse_overview(&text);
            overview.cited_cases =
                resolve_cited_cases(&parsed.cases, &overview.retrieved, annotations);
            overview.parse_miss = parsed.parse_miss;
            overview.degraded = parsed.parse_miss;
            overview.answer_text = text;
        }
        Err(e) => {
            log::warn!("answer generation failed, returning retrieval only: {e}");
            overview.degraded = true;
            overview.generation_error = Some(e.to_string());
        }
    }
    Ok((overview, timing))
}

/// Text to index for one document, typically its summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSource {
    pub doc_id: String,
    pub text: String,
}

fn metadata_for(doc_id: &str, record: Option<&AnnotationRecord>) -> Metadata {
    let mut m = Metadata::new();
    m.insert(META_DOC_ID.into(), doc_id.to_string());
    if let Some(r) = record {
        for (k, v) in [
            (META_CASE_NAME, r.case_name.clone()),
            (META_CASE_TYPE, r.case_type.clone()),
            (META_DATE, r.date.to_string()),
        ] {
            if !v.is_empty() {
                m.insert(k.into(), v);
            }
        }
    }
    m
}

/// Splits each source into token windows, embeds them and stores them with
/// annotation metadata. Sources with no text are skipped.
pub fn build_index(
    sources: &[IndexSource],
    annotations: Option<&AnnotationStore>,
    embedder: &dyn Embedder,
    params: &ChunkParams,
) -> Result<VectorIndex<f64>, RagError> {
    params.validate()?;
    let mut index = VectorIndex::with_fingerprint(embedder.fingerprint());
    for source in sources {
        let chunks = chunk_by_tokens(
            &source.doc_id,
            &source.text,
            params.max_tokens,
            params.overlap_tokens,
        )?;
        if chunks.is_empty() {
            log::warn!("`{}` has no text to index", source.doc_id);
            continue;
        }
        let texts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
        let vectors = embed(embedder, &texts).map_err(RagError::Embedding)?;
        let metadata = metadata_for(&source.doc_id, annotations.and_then(|a| a.get(&source.doc_id)));
        for (chunk, vector) in chunks.into_iter().zip(vectors) {
            index.insert(chunk, vector, metadata.clone())?;
        }
    }
    Ok(index)
}
