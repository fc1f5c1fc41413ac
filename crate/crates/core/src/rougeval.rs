//! ROUGE-1, ROUGE-2 and ROUGE-L scoring and the summarization ablation.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::JudgmentDocument;
use crate::providers::Providers;
use crate::scalar::Scalar;
use crate::summarize::{summarize_document, SummarizationVariant, SummarizeParams};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct RougeScore<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: Scalar> RougeScore<T> {
    /// Precision and recall from an overlap count; empty sides score zero.
    pub fn from_overlap(overlap: usize, candidate_len: usize, reference_len: usize) -> Self {
        let ratio = |n: usize, d: usize| {
            if d == 0 {
                T::zero()
            } else {
                T::from_count(n) / T::from_count(d)
            }
        };
        let precision = ratio(overlap, candidate_len);
        let recall = ratio(overlap, reference_len);
        let sum = precision + recall;
        let f1 = if sum == T::zero() {
            T::zero()
        } else {
            (precision + precision) * recall / sum
        };
        Self {
            precision,
            recall,
            f1,
        }
    }

    pub fn get(&self, metric: Metric) -> T {
        match metric {
            Metric::Recall => self.recall,
            Metric::Precision => self.precision,
            Metric::F1 => self.f1,
        }
    }
}

/// Lowercases and splits on every non-alphanumeric character.
pub fn normalize_for_rouge(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_counts<S: Eq + Hash>(tokens: &[S], n: usize) -> HashMap<&[S], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram overlap. `n` must be at least 1.
pub fn rouge_n<T: Scalar, S: Eq + Hash>(candidate: &[S], reference: &[S], n: usize) -> RougeScore<T> {
    assert!(n >= 1, "n-gram order must be at least 1");
    let cand = ngram_counts(candidate, n);
    let refs = ngram_counts(reference, n);
    let overlap = cand
        .iter()
        .map(|(gram, &c)| c.min(refs.get(gram).copied().unwrap_or(0)))
        .sum();
    let total = |m: &HashMap<&[S], usize>| m.values().sum::<usize>();
    RougeScore::from_overlap(overlap, total(&cand), total(&refs))
}

/// Quadratic dynamic-programming LCS length.
pub fn lcs_length_dp<S: Eq>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Bit-parallel LCS length (Allison–Dix / Hyyrö), `O(|a| * |b| / 64)`.
pub fn lcs_length<S: Eq + Hash>(a: &[S], b: &[S]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return 0;
    }
    let words = b.len().div_ceil(64);
    let mut masks: HashMap<&S, Vec<u64>> = HashMap::new();
    for (j, y) in b.iter().enumerate() {
        masks.entry(y).or_insert_with(|| vec![0; words])[j / 64] |= 1 << (j % 64);
    }
    let zero = vec![0u64; words];
    let mut v = vec![u64::MAX; words];
    for x in a {
        let m = masks.get(x).unwrap_or(&zero);
        let mut carry = 0u64;
        for w in 0..words {
            let u = v[w] & m[w];
            let (s1, c1) = v[w].overflowing_add(u);
            let (s2, c2) = s1.overflowing_add(carry);
            carry = u64::from(c1 || c2);
            v[w] = s2 | (v[w] - u);
        }
    }
    let tail = b.len() % 64;
    v.iter()
        .enumerate()
        .map(|(w, &bits)| {
            let bits = if w == words - 1 && tail != 0 {
                bits | !((1u64 << tail) - 1)
            } else {
                bits
            };
            bits.count_zeros() as usize
        })
        .sum()
}

pub fn rouge_l<T: Scalar, S: Eq + Hash>(candidate: &[S], reference: &[S]) -> RougeScore<T> {
    RougeScore::from_overlap(lcs_length(candidate, reference), candidate.len(), reference.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct RougeTriple<T> {
    pub rouge1: RougeScore<T>,
    pub rouge2: RougeScore<T>,
    pub rouge_l: RougeScore<T>,
}

impl<T: Scalar> RougeTriple<T> {
    pub fn get(&self, kind: RougeKind) -> RougeScore<T> {
        match kind {
            RougeKind::Rouge1 => self.rouge1,
            RougeKind::Rouge2 => self.rouge2,
            RougeKind::RougeL => self.rouge_l,
        }
    }
}

/// Scores a candidate summary against a reference after normalization.
pub fn score_texts<T: Scalar>(candidate: &str, reference: &str) -> RougeTriple<T> {
    let c = normalize_for_rouge(candidate);
    let r = normalize_for_rouge(reference);
    RougeTriple {
        rouge1: rouge_n(&c, &r, 1),
        rouge2: rouge_n(&c, &r, 2),
        rouge_l: rouge_l(&c, &r),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeKind {
    Rouge1,
    Rouge2,
    RougeL,
}

impl RougeKind {
    pub const ALL: [RougeKind; 3] = [RougeKind::Rouge1, RougeKind::Rouge2, RougeKind::RougeL];

    pub fn label(&self) -> &'static str {
        match self {
            RougeKind::Rouge1 => "ROUGE-1",
            RougeKind::Rouge2 => "ROUGE-2",
            RougeKind::RougeL => "ROUGE-L",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Recall,
    Precision,
    F1,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Recall, Metric::Precision, Metric::F1];

    pub fn label(&self) -> &'static str {
        match self {
            Metric::Recall => "Recall",
            Metric::Precision => "Precision",
            Metric::F1 => "F1",
        }
    }
}

/// Arithmetic mean of each component over all triples.
pub fn macro_average<T: Scalar>(scores: &[RougeTriple<T>]) -> Option<RougeTriple<T>> {
    if scores.is_empty() {
        return None;
    }
    let n = T::from_count(scores.len());
    let mean = |f: &dyn Fn(&RougeTriple<T>) -> RougeScore<T>| {
        let mut acc = RougeScore {
            precision: T::zero(),
            recall: T::zero(),
            f1: T::zero(),
        };
        for s in scores {
            let v = f(s);
            acc.precision = acc.precision + v.precision;
            acc.recall = acc.recall + v.recall;
            acc.f1 = acc.f1 + v.f1;
        }
        RougeScore {
            precision: acc.precision / n,
            recall: acc.recall / n,
            f1: acc.f1 / n,
        }
    };
    Some(RougeTriple {
        rouge1: mean(&|s| s.rouge1),
        rouge2: mean(&|s| s.rouge2),
        rouge_l: mean(&|s| s.rouge_l),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFailure {
    pub doc_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: SummarizationVariant,
    pub label: String,
    pub scored: usize,
    pub failures: Vec<RowFailure>,
    /// Macro average over the scored documents, `None` if none succeeded.
    pub scores: Option<RougeTriple<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub documents: usize,
    pub settings: SummarizeParams,
    pub rows: Vec<AblationRow>,
}

/// Displayed precision of table cells; best-in-column marks compare at it.
const DISPLAY_DECIMALS: usize = 4;

fn rounded(v: f64) -> i64 {
    (v * 10f64.powi(DISPLAY_DECIMALS as i32)).round() as i64
}

impl AblationReport {
    pub fn row(&self, variant: SummarizationVariant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    /// Rows whose displayed value is the column maximum.
    pub fn best(&self, metric: Metric, kind: RougeKind) -> Vec<SummarizationVariant> {
        let value = |r: &AblationRow| r.scores.map(|s| rounded(s.get(kind).get(metric)));
        let Some(max) = self.rows.iter().filter_map(value).max() else {
            return Vec::new();
        };
        self.rows
            .iter()
            .filter(|r| value(r) == Some(max))
            .map(|r| r.variant)
            .collect()
    }

    /// One markdown table: rows are variants, columns ROUGE-1/2/L.
    pub fn table(&self, metric: Metric) -> String {
        let label_width = self
            .rows
            .iter()
            .map(|r| r.label.len())
            .max()
            .unwrap_or(0)
            .max("Summarization Technique".len());
        let mut out = String::new();
        let _ = writeln!(out, "{}", metric.label());
        let _ = write!(out, "| {:<label_width$} |", "Summarization Technique");
        for k in RougeKind::ALL {
            let _ = write!(out, " {:<9} |", k.label());
        }
        out.push('\n');
        let _ = write!(out, "|{}|", "-".repeat(label_width + 2));
        for _ in RougeKind::ALL {
            let _ = write!(out, "{}|", "-".repeat(11));
        }
        out.push('\n');
        let best: Vec<Vec<SummarizationVariant>> =
            RougeKind::ALL.iter().map(|&k| self.best(metric, k)).collect();
        for row in &self.rows {
            let _ = write!(out, "| {:<label_width$} |", row.label);
            for (i, k) in RougeKind::ALL.iter().enumerate() {
                let cell = match row.scores {
                    Some(s) => {
                        let mark = if best[i].contains(&row.variant) { "*" } else { "" };
                        format!("{:.*}{mark}", DISPLAY_DECIMALS, s.get(*k).get(metric))
                    }
                    None => "n/a".to_string(),
                };
                let _ = write!(out, " {cell:<9} |");
            }
            out.push('\n');
        }
        out
    }

    /// Recall, precision and F1 tables followed by failure counts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for m in Metric::ALL {
            out.push_str(&self.table(m));
            out.push('\n');
        }
        let _ = writeln!(out, "Documents: {}. Best value per column marked with *.", self.documents);
        for row in self.rows.iter().filter(|r| !r.failures.is_empty()) {
            let _ = writeln!(out, "{}: {} document(s) failed", row.label, row.failures.len());
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AblationError {
    #[error("no reference summary for `{0}`")]
    MissingReference(String),
    #[error("the evaluation corpus is empty")]
    EmptyCorpus,
}

/// Summarizes every document with every variant and macro-averages ROUGE
/// against the references. Per-document failures are counted, not fatal.
pub fn run_ablation(
    docs: &[JudgmentDocument],
    references: &BTreeMap<String, String>,
    variants: &[SummarizationVariant],
    providers: &Providers,
    params: &SummarizeParams,
) -> Result<AblationReport, AblationError> {
    if docs.is_empty() {
        return Err(AblationError::EmptyCorpus);
    }
    if let Some(d) = docs.iter().find(|d| !references.contains_key(&d.doc_id)) {
        return Err(AblationError::MissingReference(d.doc_id.clone()));
    }
    let rows = variants
        .iter()
        .map(|&variant| {
            let mut scores = Vec::new();
            let mut failures = Vec::new();
            for doc in docs {
                match summarize_document(doc, variant, providers, params) {
                    Ok(s) => scores.push(score_texts::<f64>(&s.text, &references[&doc.doc_id])),
                    Err(e) => {
                        log::warn!("{variant}: {e}");
                        failures.push(RowFailure {
                            doc_id: doc.doc_id.clone(),
                            message: e.to_string(),
                        });
                    }
                }
            }
            AblationRow {
                variant,
                label: variant.label(),
                scored: scores.len(),
                failures,
                scores: macro_average(&scores),
            }
        })
        .collect();
    Ok(AblationReport {
        documents: docs.len(),
        settings: params.clone(),
        rows,
    })
}
