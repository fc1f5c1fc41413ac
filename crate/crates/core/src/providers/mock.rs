//! Deterministic offline providers.
//!
//! Every mock is a pure function of its input, so pipelines built on them are
//! bit-reproducible across runs and platforms.

use std::sync::OnceLock;

use regex::Regex;

use super::{
    EmbeddingFingerprint, EmbeddingVector, Embedder, FailureKind, GenerationRequest, RetryPolicy,
    TextGenerator,
};
use crate::chunker::split_sentences;
use crate::scalar::Scalar;

/// Seed of the feature-hashing embedder.
pub const MOCK_HASH_SEED: u64 = 0x5eed_1a6a_c0de_2024;
pub const DEFAULT_MOCK_DIM: usize = 64;
pub const MIN_MOCK_DIM: usize = 8;
pub const MOCK_EMBEDDER_ID: &str = "mock-hash";

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Seeded 64-bit FNV-1a.
pub fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // final avalanche so low bits depend on every byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

fn hash_features(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
}

/// Feature-hashed embedding: every lowercase alphanumeric token adds ±1 to
/// one of `dim` buckets (bucket and sign from two independent hashes), then
/// the vector is L2-normalized.
pub fn mock_hash_embedding<T: Scalar>(
    text: &str,
    dim: usize,
) -> Result<EmbeddingVector<T>, FailureKind> {
    mock_hash_embedding_seeded(text, dim, MOCK_HASH_SEED)
}

pub fn mock_hash_embedding_seeded<T: Scalar>(
    text: &str,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingVector<T>, FailureKind> {
    if dim < MIN_MOCK_DIM {
        return Err(FailureKind::InvalidRequest(format!(
            "mock embedding dim must be at least {MIN_MOCK_DIM}, got {dim}"
        )));
    }
    let mut acc = vec![0.0f64; dim];
    let mut features = 0usize;
    for token in hash_features(text) {
        let bucket = (fnv1a(seed, token.as_bytes()) % dim as u64) as usize;
        let sign_hash = fnv1a(seed.rotate_left(17) ^ 0x9e37_79b9_7f4a_7c15, token.as_bytes());
        acc[bucket] += if sign_hash & 1 == 0 { 1.0 } else { -1.0 };
        features += 1;
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if features == 0 || norm == 0.0 {
        // Cancelling features can also zero the vector.
        return Err(FailureKind::ZeroFeatures);
    }
    EmbeddingVector::new(acc.into_iter().map(|v| T::from_f64_lossy(v / norm)).collect())
}

/// [`Embedder`] backed by [`mock_hash_embedding_seeded`].
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize) -> Result<Self, FailureKind> {
        Self::with_seed(dim, MOCK_HASH_SEED)
    }

    pub fn with_seed(dim: usize, seed: u64) -> Result<Self, FailureKind> {
        if dim < MIN_MOCK_DIM {
            return Err(FailureKind::InvalidRequest(format!(
                "mock embedding dim must be at least {MIN_MOCK_DIM}"
            )));
        }
        Ok(Self { dim, seed })
    }
}

impl Embedder for HashEmbedder {
    fn fingerprint(&self) -> EmbeddingFingerprint {
        EmbeddingFingerprint {
            provider_id: MOCK_EMBEDDER_ID.into(),
            dim: self.dim,
            seed: self.seed,
        }
    }

    fn embed_once(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector<f64>>, FailureKind> {
        texts
            .iter()
            .map(|t| mock_hash_embedding_seeded(t, self.dim, self.seed))
            .collect()
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Returns the text following the first blank line of a prompt, which is
/// where every pipeline template places its payload.
pub fn prompt_payload(prompt: &str) -> &str {
    prompt.split_once("\n\n").map(|(_, rest)| rest).unwrap_or(prompt)
}

const CANNED: &[&str] = &[
    "The court examined the record and the submissions of both parties.",
    "The appeal raises a question on the interpretation of the governing statute.",
    "The impugned order was found to suffer from no jurisdictional error.",
    "The petitioner sought relief against the order of the authority below.",
    "Costs were left to be borne by the parties themselves.",
];

/// Completion chosen by prompt hash and tagged with it.
#[derive(Debug, Clone, Copy, Default)]
pub struct CannedGenerator;

impl CannedGenerator {
    pub fn completion_for(prompt: &str) -> String {
        let h = fnv1a(MOCK_HASH_SEED, prompt.as_bytes());
        format!("{} [ref {h:016x}]", CANNED[(h % CANNED.len() as u64) as usize])
    }
}

impl TextGenerator for CannedGenerator {
    fn id(&self) -> &str {
        "mock-canned"
    }

    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind> {
        Ok(Self::completion_for(&request.prompt))
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Echoes the first `words` words of the prompt payload.
#[derive(Debug, Clone, Copy)]
pub struct EchoGenerator {
    pub words: usize,
}

impl EchoGenerator {
    /// Echoes the whole payload.
    pub fn identity() -> Self {
        Self { words: usize::MAX }
    }
}

impl TextGenerator for EchoGenerator {
    fn id(&self) -> &str {
        "mock-echo"
    }

    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind> {
        let payload = prompt_payload(&request.prompt);
        if self.words == usize::MAX {
            return Ok(payload.trim().to_string());
        }
        Ok(payload
            .split_whitespace()
            .take(self.words)
            .collect::<Vec<_>>()
            .join(" "))
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Lead-sentence summarizer: the first `sentences` sentences of the payload,
/// optionally cut to `word_cap` words.
#[derive(Debug, Clone)]
pub struct LeadGenerator {
    id: &'static str,
    pub sentences: usize,
    pub word_cap: Option<usize>,
}

impl LeadGenerator {
    /// Stand-in for the general-purpose summarizer.
    pub fn base() -> Self {
        Self {
            id: "mock-lead-base",
            sentences: 3,
            word_cap: Some(24),
        }
    }

    /// Stand-in for the headnote fine-tuned summarizer.
    pub fn finetuned() -> Self {
        Self {
            id: "mock-lead-ft",
            sentences: 3,
            word_cap: None,
        }
    }
}

impl TextGenerator for LeadGenerator {
    fn id(&self) -> &str {
        self.id
    }

    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind> {
        let payload = prompt_payload(&request.prompt);
        let lead: Vec<&str> = split_sentences(payload)
            .iter()
            .take(self.sentences)
            .map(|s| &payload[s.span.clone()])
            .collect();
        let text = lead.join(" ");
        Ok(match self.word_cap {
            Some(cap) => text.split_whitespace().take(cap).collect::<Vec<_>>().join(" "),
            None => text,
        })
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Returns the same text for every prompt.
#[derive(Debug, Clone)]
pub struct FixedGenerator {
    pub text: String,
}

impl TextGenerator for FixedGenerator {
    fn id(&self) -> &str {
        "mock-fixed"
    }

    fn generate_once(&self, _: &GenerationRequest) -> Result<String, FailureKind> {
        Ok(self.text.clone())
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Fails every attempt with the same cause.
#[derive(Debug, Clone)]
pub struct FailingGenerator {
    pub kind: FailureKind,
}

impl FailingGenerator {
    pub fn unreachable() -> Self {
        Self {
            kind: FailureKind::Transport("connection refused".into()),
        }
    }
}

impl TextGenerator for FailingGenerator {
    fn id(&self) -> &str {
        "mock-failing"
    }

    fn generate_once(&self, _: &GenerationRequest) -> Result<String, FailureKind> {
        Err(self.kind.clone())
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Answers retrieval prompts by restating each context block in the
/// labeled-line overview format.
#[derive(Debug, Clone, Copy, Default)]
pub struct OverviewGenerator;

#[derive(Default)]
struct ContextBlock {
    doc_id: String,
    case: String,
    date: String,
    outcome: String,
    citations: String,
    provisions: String,
    excerpt: String,
}

fn block_header() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\[(\d+)\] doc_id: (.+)$").expect("valid regex"))
}

fn parse_context_blocks(prompt: &str) -> (Vec<ContextBlock>, String) {
    let mut blocks: Vec<ContextBlock> = Vec::new();
    let mut query = String::new();
    let mut in_excerpt = false;
    for line in prompt.lines() {
        if let Some(caps) = block_header().captures(line) {
            blocks.push(ContextBlock {
                doc_id: caps[2].trim().to_string(),
                ..Default::default()
            });
            in_excerpt = false;
            continue;
        }
        if let Some(q) = line.strip_prefix("Question: ") {
            query = q.trim().to_string();
            in_excerpt = false;
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            continue;
        };
        if in_excerpt {
            if !block.excerpt.is_empty() {
                block.excerpt.push('\n');
            }
            block.excerpt.push_str(line);
            continue;
        }
        let field = |prefix: &str| line.strip_prefix(prefix).map(|v| v.trim().to_string());
        if line == "Excerpt:" {
            in_excerpt = true;
        } else if let Some(v) = field("Case: ") {
            block.case = v;
        } else if let Some(v) = field("Date: ") {
            block.date = v;
        } else if let Some(v) = field("Outcome: ") {
            block.outcome = v;
        } else if let Some(v) = field("Citations: ") {
            block.citations = v;
        } else if let Some(v) = field("Provisions: ") {
            block.provisions = v;
        }
    }
    (blocks, query)
}

impl TextGenerator for OverviewGenerator {
    fn id(&self) -> &str {
        "mock-overview"
    }

    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind> {
        let (blocks, query) = parse_context_blocks(&request.prompt);
        let mut out = String::new();
        let mut seen = std::collections::HashSet::new();
        for b in blocks.iter().filter(|b| seen.insert(b.doc_id.clone())) {
            let or = |v: &str, fallback: &str| {
                if v.is_empty() {
                    fallback.to_string()
                } else {
                    v.to_string()
                }
            };
            let excerpt = b.excerpt.trim();
            let first = split_sentences(excerpt)
                .first()
                .map(|s| s.text.clone())
                .unwrap_or_default();
            out.push_str(&format!(
                "CASE: {}\nDATE: {}\nOUTCOME: {}\nCITATIONS: {}\nPROVISIONS: {}\nSUMMARY: {}\n\n",
                or(&b.case, &b.doc_id),
                or(&b.date, "not stated"),
                or(&b.outcome, "not stated"),
                b.citations,
                b.provisions,
                first.replace('\n', " "),
            ));
        }
        if seen.is_empty() {
            out.push_str("No relevant cases were found in the supplied context.");
        } else {
            out.push_str(&format!(
                "The {} case(s) above are the closest matches for: {query}",
                seen.len()
            ));
        }
        Ok(out)
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

/// Rule-based stand-in for the annotation model: reads the judgment from an
/// annotation prompt and replies in the labeled-field format.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnnotationGenerator;

fn citation_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"AIR \d{4} [A-Z][A-Za-z]* \d+|\(\d{4}\) \d+ [A-Z]+ \d+|\d{4} \(\d+\) [A-Z]+ \d+")
            .expect("valid regex")
    })
}

fn provision_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(
            r"(?:Section|Article|Order|Rule) \d+[A-Z]?(?:\(\d+\))*(?: of the (?:[A-Z][A-Za-z]* )*(?:Act|Code|Constitution of India)(?:, \d{4})?)?",
        )
        .expect("valid regex")
    })
}

fn unique(items: impl Iterator<Item = String>) -> Vec<String> {
    let mut seen = std::collections::HashSet::new();
    items.filter(|i| seen.insert(i.clone())).collect()
}

fn split_parties(case_name: &str) -> (String, String) {
    for sep in [" vs. ", " vs ", " v. ", " versus ", " Vs. ", " Vs ", " VS "] {
        if let Some((a, r)) = case_name.split_once(sep) {
            return (a.trim().to_string(), r.trim().to_string());
        }
    }
    (case_name.trim().to_string(), String::new())
}

fn classify_case(lower: &str) -> &'static str {
    const RULES: &[(&[&str], &str)] = &[
        (&["arbitration"], "Arbitration"),
        (&["land acquisition"], "Land Acquisition"),
        (&["income tax", "income-tax", "sales tax", "assessee"], "Taxation"),
        (&["probate", "testament"], "Probate"),
        (&["indian penal code", "code of criminal procedure", "bail", "accused"], "Criminal"),
        (&["workmen", "industrial dispute", "labour"], "Labour Law"),
        (&["article 226", "writ petition", "fundamental right"], "Constitutional"),
        (&["contract", "agreement"], "Contract"),
    ];
    RULES
        .iter()
        .find(|(keys, _)| keys.iter().any(|k| lower.contains(k)))
        .map(|(_, label)| *label)
        .unwrap_or("Civil")
}

fn outcome_of(sentence: &str) -> Option<&'static str> {
    let lower = sentence.to_lowercase();
    if lower.contains("partly allowed") {
        Some("Partly allowed")
    } else if lower.contains("dismissed") {
        Some("Dismissed")
    } else if lower.contains("allowed") || lower.contains("set aside") {
        Some("Allowed")
    } else if lower.contains("disposed of") {
        Some("Disposed of")
    } else {
        None
    }
}

impl AnnotationGenerator {
    pub fn annotate_text(judgment: &str) -> String {
        let lines: Vec<&str> = judgment.lines().map(str::trim).collect();
        let case_line = lines
            .iter()
            .find(|l| {
                let lower = l.to_lowercase();
                lower.contains(" vs ") || lower.contains(" vs. ") || lower.contains(" v. ")
            })
            .copied()
            .unwrap_or_default();
        let (case_name, date) = match case_line.rsplit_once(" on ") {
            Some((name, date)) => (name.trim(), date.trim()),
            None => (case_line, ""),
        };
        let (appellant, respondent) = split_parties(case_name);
        let judges: Vec<String> = lines
            .iter()
            .find_map(|l| l.strip_prefix("Before:"))
            .map(|rest| {
                rest.split(';')
                    .map(|j| {
                        j.trim()
                            .trim_start_matches("Hon'ble")
                            .trim()
                            .trim_start_matches("Justice")
                            .trim()
                            .to_string()
                    })
                    .filter(|j| !j.is_empty())
                    .collect()
            })
            .unwrap_or_default();

        let body_start = lines
            .iter()
            .position(|l| l.is_empty())
            .map(|i| {
                judgment
                    .lines()
                    .take(i + 1)
                    .map(|l| l.len() + 1)
                    .sum::<usize>()
            })
            .unwrap_or(0)
            .min(judgment.len());
        let body = &judgment[body_start..];
        let sentences: Vec<&str> = split_sentences(body)
            .iter()
            .map(|s| &body[s.span.clone()])
            .collect();
        let summary = sentences
            .iter()
            .take(2)
            .map(|s| s.replace('\n', " "))
            .collect::<Vec<_>>()
            .join(" ");
        let decisive = sentences
            .iter()
            .rev()
            .find(|s| outcome_of(s).is_some())
            .or(sentences.last())
            .map(|s| s.replace('\n', " "))
            .unwrap_or_default();
        let outcome = outcome_of(&decisive).unwrap_or("Unknown");

        let citations = unique(citation_re().find_iter(judgment).map(|m| m.as_str().to_string()));
        let provisions =
            unique(provision_re().find_iter(judgment).map(|m| m.as_str().to_string()));

        format!(
            "CASE NAME: {case_name}\nDATE: {date}\nAPPELLANT: {appellant}\nRESPONDENT: {respondent}\n\
             JUDGES: {}\nCITATIONS: {}\nRELATED PROVISIONS: {}\nCASE TYPE: {}\nJUDGEMENT: {decisive}\n\
             SUMMARY: {summary}\nOUTCOME OF APPELLANT: {outcome}\n",
            judges.join("; "),
            citations.join("; "),
            provisions.join("; "),
            classify_case(&judgment.to_lowercase()),
        )
    }
}

impl TextGenerator for AnnotationGenerator {
    fn id(&self) -> &str {
        "mock-annotator"
    }

    fn generate_once(&self, request: &GenerationRequest) -> Result<String, FailureKind> {
        let judgment = request
            .prompt
            .split_once(crate::annotate::JUDGMENT_MARKER)
            .map(|(_, j)| j)
            .unwrap_or(&request.prompt);
        Ok(Self::annotate_text(judgment))
    }

    fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy::immediate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::{embed, generate};

    fn cosine(a: &EmbeddingVector<f64>, b: &EmbeddingVector<f64>) -> f64 {
        let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        dot / (a.norm() * b.norm())
    }

    #[test]
    fn hash_embedding_is_deterministic_and_unit_norm() {
        let a = mock_hash_embedding::<f64>("a", 64).unwrap();
        let b = mock_hash_embedding::<f64>("a", 64).unwrap();
        let bits = |v: &EmbeddingVector<f64>| v.values().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        for text in ["tax appeal", "a", "Sec. 144(2) of the Code", "land dispute appeal"] {
            let v = mock_hash_embedding::<f64>(text, 64).unwrap();
            assert_eq!(v.dim(), 64);
            assert!((v.norm() - 1.0).abs() <= 1e-9, "{text}");
        }
    }

    #[test]
    fn hash_embedding_similarity_follows_token_overlap() {
        let base = mock_hash_embedding::<f64>("land dispute", 64).unwrap();
        let near = mock_hash_embedding::<f64>("land dispute appeal", 64).unwrap();
        let far = mock_hash_embedding::<f64>("zzz qqq", 64).unwrap();
        assert!(cosine(&base, &near) > cosine(&base, &far));
    }

    #[test]
    fn hash_embedding_errors() {
        assert_eq!(
            mock_hash_embedding::<f64>("", 64).unwrap_err(),
            FailureKind::ZeroFeatures
        );
        assert_eq!(
            mock_hash_embedding::<f64>("?!", 64).unwrap_err(),
            FailureKind::ZeroFeatures
        );
        assert!(mock_hash_embedding::<f64>("ok", 4).is_err());
    }

    #[test]
    fn hash_embedder_preserves_order_and_count() {
        let e = HashEmbedder::new(32).unwrap();
        let texts = ["one", "two", "three"];
        let out = embed(&e, &texts).unwrap();
        assert_eq!(out.len(), 3);
        for (t, v) in texts.iter().zip(&out) {
            assert_eq!(v, &mock_hash_embedding::<f64>(t, 32).unwrap());
        }
    }

    #[test]
    fn canned_completion_keyed_by_prompt_hash() {
        let req = GenerationRequest::with_prompt("P").unwrap();
        let a = generate(&CannedGenerator, &req).unwrap();
        let b = generate(&CannedGenerator, &req).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(&format!("{:016x}", fnv1a(MOCK_HASH_SEED, b"P"))));
        let other = generate(&CannedGenerator, &GenerationRequest::with_prompt("Q").unwrap()).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn failing_generator_reports_three_attempts() {
        let req = GenerationRequest::with_prompt("P").unwrap();
        let err = generate(&FailingGenerator::unreachable(), &req).unwrap_err();
        assert_eq!(err.attempts, 3);
        assert!(matches!(err.kind, FailureKind::Transport(_)));
    }

    #[test]
    fn echo_and_lead_generators() {
        let req = GenerationRequest::with_prompt(
            "Header line\n\nOne two three. Four five six. Seven eight nine. Ten.",
        )
        .unwrap();
        assert_eq!(
            EchoGenerator { words: 4 }.generate_once(&req).unwrap(),
            "One two three. Four"
        );
        assert_eq!(
            LeadGenerator::finetuned().generate_once(&req).unwrap(),
            "One two three. Four five six. Seven eight nine."
        );
    }

    #[test]
    fn annotation_mock_extracts_header_fields() {
        let text = "Calcutta High Court\nRamesh Das vs State Of West Bengal on 12 March, 2019\nBefore: Hon'ble Justice A. Banerjee; Hon'ble Justice S. Roy\n\nThe appellant challenges a conviction under Section 302 of the Indian Penal Code. Reliance was placed on AIR 1990 SC 12. The appeal is dismissed.";
        let out = AnnotationGenerator::annotate_text(text);
        assert!(out.contains("CASE NAME: Ramesh Das vs State Of West Bengal\n"));
        assert!(out.contains("DATE: 12 March, 2019\n"));
        assert!(out.contains("JUDGES: A. Banerjee; S. Roy\n"));
        assert!(out.contains("CITATIONS: AIR 1990 SC 12\n"));
        assert!(out.contains("RELATED PROVISIONS: Section 302 of the Indian Penal Code\n"));
        assert!(out.contains("CASE TYPE: Criminal\n"));
        assert!(out.contains("OUTCOME OF APPELLANT: Dismissed\n"));
    }
}
