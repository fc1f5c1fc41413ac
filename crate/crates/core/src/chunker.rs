//! Sentence segmentation and the two chunking regimes.
//!
//! Summarization input is packed into runs of whole sentences bounded by a
//! word budget, with a sentence overlap between neighbours. Index input is cut
//! into fixed token windows with a token overlap.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_WORDS: usize = 200;
pub const DEFAULT_OVERLAP_SENTENCES: usize = 2;
pub const DEFAULT_MAX_TOKENS: usize = 1024;
pub const DEFAULT_OVERLAP_TOKENS: usize = 100;

/// Words ending in a period that never end a sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "Mr.", "Mrs.", "Ms.", "Dr.", "Hon'ble.", "Hon\u{2019}ble.", "No.", "Nos.", "vs.", "v.",
    "Sec.", "Art.", "Co.", "Ltd.", "Pvt.", "Smt.", "Sri.", "Rs.", "Ors.", "Anr.", "Govt.", "viz.",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChunkError {
    #[error("invalid chunk parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkParams {
    pub max_words: usize,
    pub overlap_sentences: usize,
    pub max_tokens: usize,
    pub overlap_tokens: usize,
}

impl Default for ChunkParams {
    fn default() -> Self {
        Self {
            max_words: DEFAULT_MAX_WORDS,
            overlap_sentences: DEFAULT_OVERLAP_SENTENCES,
            max_tokens: DEFAULT_MAX_TOKENS,
            overlap_tokens: DEFAULT_OVERLAP_TOKENS,
        }
    }
}

impl ChunkParams {
    pub fn validate(&self) -> Result<(), ChunkError> {
        if self.max_words == 0 {
            return Err(ChunkError::InvalidParams("max_words must be at least 1".into()));
        }
        if self.max_tokens <= self.overlap_tokens {
            return Err(ChunkError::InvalidParams(format!(
                "max_tokens ({}) must exceed overlap_tokens ({})",
                self.max_tokens, self.overlap_tokens
            )));
        }
        Ok(())
    }
}

/// A sentence and its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub index: usize,
    pub span: Range<usize>,
}

impl Sentence {
    pub fn word_count(&self) -> usize {
        count_words(&self.text)
    }
}

pub fn count_words(text: &str) -> usize {
    text.split_whitespace().count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkUnit {
    Words,
    Tokens,
}

/// A contiguous piece of a document.
///
/// `range` is half-open and counts sentences for word chunks, tokens for
/// token chunks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub doc_id: String,
    pub text: String,
    pub unit: ChunkUnit,
    pub range: (usize, usize),
    /// A single sentence longer than the word budget.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub oversize: bool,
}

const CLOSERS: &[char] = &['"', '\'', '\u{201d}', '\u{2019}', ')', ']'];
const OPENERS: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

fn is_abbreviation(word: &str) -> bool {
    let word = word.trim_start_matches(OPENERS);
    if ABBREVIATIONS.contains(&word) {
        return true;
    }
    // initials such as "A."
    let mut chars = word.chars();
    matches!(
        (chars.next(), chars.next(), chars.next()),
        (Some(c), Some('.'), None) if c.is_uppercase()
    )
}

/// Splits `text` into sentences.
///
/// A boundary is a `.`, `?` or `!` (plus any closing quotes or brackets)
/// followed by whitespace and then an uppercase letter or digit, unless the
/// word ending in `.` is an abbreviation or an initial. A blank line also
/// ends a sentence. Only whitespace falls between consecutive spans.
pub fn split_sentences(text: &str) -> Vec<Sentence> {
    let bytes_len = text.len();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut boundaries: Vec<Range<usize>> = Vec::new();

    let mut start: Option<usize> = None;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            // Paragraph break.
            let run_end = chars[i..]
                .iter()
                .position(|(_, ch)| !ch.is_whitespace())
                .map(|o| i + o)
                .unwrap_or(chars.len());
            let newlines = chars[i..run_end].iter().filter(|(_, ch)| *ch == '\n').count();
            if newlines >= 2 {
                if let Some(s) = start.take() {
                    boundaries.push(s..pos);
                }
            }
            i = run_end;
            continue;
        }
        if start.is_none() {
            start = Some(pos);
        }
        if matches!(c, '.' | '?' | '!') {
            let mut j = i + 1;
            while j < chars.len() && CLOSERS.contains(&chars[j].1) {
                j += 1;
            }
            let end_byte = chars.get(j).map(|(p, _)| *p).unwrap_or(bytes_len);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let has_space = k > j;
            let next_ok = chars
                .get(k)
                .map(|(_, ch)| ch.is_uppercase() || ch.is_ascii_digit())
                .unwrap_or(false);
            if has_space && next_ok {
                let s = start.expect("sentence started");
                let word_start = text[..pos]
                    .rfind(char::is_whitespace)
                    .map(|w| w + text[w..].chars().next().map_or(1, char::len_utf8))
                    .unwrap_or(0)
                    .max(s);
                let word = &text[word_start..pos + c.len_utf8()];
                if c != '.' || !is_abbreviation(word) {
                    boundaries.push(s..end_byte);
                    start = None;
                }
            }
            i = j;
            continue;
        }
        i += 1;
    }
    if let Some(s) = start {
        let end = text.trim_end().len();
        if end > s {
            boundaries.push(s..end);
        }
    }
    boundaries
        .into_iter()
        .enumerate()
        .map(|(index, span)| Sentence {
            text: text[span.clone()].to_string(),
            index,
            span,
        })
        .collect()
}

/// Packs whole sentences into chunks of at most `max_words` words.
///
/// Each chunk greedily takes the longest run of sentences that fits. The
/// next chunk starts `overlap_sentences` sentences before the previous end,
/// always at least one sentence after the previous start. When the overlap
/// plus the next new sentence would break the word budget the overlap is
/// shortened; a lone sentence over budget becomes its own `oversize` chunk.
pub fn chunk_by_words(
    doc_id: &str,
    sentences: &[Sentence],
    max_words: usize,
    overlap_sentences: usize,
) -> Result<Vec<Chunk>, ChunkError> {
    if max_words == 0 {
        return Err(ChunkError::InvalidParams("max_words must be at least 1".into()));
    }
    let words: Vec<usize> = sentences.iter().map(Sentence::word_count).collect();
    let n = sentences.len();
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        let mut total = words[start];
        while end < n && total + words[end] <= max_words {
            total += words[end];
            end += 1;
        }
        let text = sentences[start..end]
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join(" ");
        chunks.push(Chunk {
            chunk_id: format!("{doc_id}#w{}", chunks.len()),
            doc_id: doc_id.to_string(),
            text,
            unit: ChunkUnit::Words,
            range: (start, end),
            oversize: end - start == 1 && total > max_words,
        });
        if end == n {
            break;
        }
        let mut next = end.saturating_sub(overlap_sentences).max(start + 1);
        let mut carried: usize = words[next..end].iter().sum();
        while next < end && carried + words[end] > max_words {
            carried -= words[next];
            next += 1;
        }
        start = next;
    }
    Ok(chunks)
}

/// Token boundaries of a text.
pub trait Tokenizer: Send + Sync {
    /// Byte spans of the tokens, in order.
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;

    fn count_tokens(&self, text: &str) -> usize {
        self.token_spans(text).len()
    }
}

/// Maximal alphanumeric runs are one token; every other non-whitespace
/// character is a token of its own.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimpleTokenizer;

impl Tokenizer for SimpleTokenizer {
    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut run: Option<usize> = None;
        for (pos, c) in text.char_indices() {
            if c.is_alphanumeric() {
                run.get_or_insert(pos);
                continue;
            }
            if let Some(s) = run.take() {
                spans.push(s..pos);
            }
            if !c.is_whitespace() {
                spans.push(pos..pos + c.len_utf8());
            }
        }
        if let Some(s) = run {
            spans.push(s..text.len());
        }
        spans
    }
}

pub fn tokenize(text: &str) -> Vec<&str> {
    SimpleTokenizer
        .token_spans(text)
        .into_iter()
        .map(|r| &text[r])
        .collect()
}

pub fn count_tokens(text: &str) -> usize {
    SimpleTokenizer.count_tokens(text)
}

/// Sliding token windows of `max_tokens` with stride
/// `max_tokens - overlap_tokens`, using [`SimpleTokenizer`].
pub fn chunk_by_tokens(
    doc_id: &str,
    text: &str,
    max_tokens: usize,
    overlap_tokens: usize,
) -> Result<Vec<Chunk>, ChunkError> {
    chunk_by_tokens_with(&SimpleTokenizer, doc_id, text, max_tokens, overlap_tokens)
}

pub fn chunk_by_tokens_with(
    tokenizer: &dyn Tokenizer,
    doc_id: &str,
    text: &str,
    max_tokens: usize,
    overlap_tokens: usize,
) -> Result<Vec<Chunk>, ChunkError> {
    if max_tokens <= overlap_tokens {
        return Err(ChunkError::InvalidParams(format!(
            "max_tokens ({max_tokens}) must exceed overlap_tokens ({overlap_tokens})"
        )));
    }
    let spans = tokenizer.token_spans(text);
    let n = spans.len();
    let stride = max_tokens - overlap_tokens;
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + max_tokens).min(n);
        chunks.push(Chunk {
            chunk_id: format!("{doc_id}#t{}", chunks.len()),
            doc_id: doc_id.to_string(),
            text: text[spans[start].start..spans[end - 1].end].to_string(),
            unit: ChunkUnit::Tokens,
            range: (start, end),
            oversize: false,
        });
        if end == n {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}
