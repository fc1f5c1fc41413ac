//! Raw judgment ingestion, the annotation CSV dataset, and corpus statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{self, BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

/// File extensions treated as raw judgment text.
pub const TEXT_EXTENSIONS: &[&str] = &["txt", "text"];

/// Column order of the annotation dataset.
pub const ANNOTATION_HEADER: [&str; 12] = [
    "doc_id",
    "case_name",
    "date",
    "appellant",
    "respondent",
    "judges",
    "citations",
    "related_provisions",
    "case_type",
    "judgement",
    "summary",
    "outcome_of_appellant",
];

/// Separator between items of a list-valued cell.
pub const LIST_DELIMITER: &str = "; ";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus directory {path}: {source}")]
    UnreadableDirectory {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("annotation file header does not match the expected columns")]
    BadHeader,
    #[error("row {row}, field `{field}`: {message}")]
    MalformedRow {
        row: usize,
        field: String,
        message: String,
    },
    #[error("duplicate doc_id `{doc_id}` (row {row})")]
    DuplicateDocId { doc_id: String, row: usize },
    #[error("invalid annotation for `{doc_id}`: field `{field}` {message}")]
    InvalidRecord {
        doc_id: String,
        field: &'static str,
        message: String,
    },
    #[error("annotation `{doc_id}` does not refer to a document in the corpus")]
    UnknownDocument { doc_id: String },
    #[error("corpus file {path}, line {line}: {message}")]
    BadCorpusLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// One raw court judgment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentDocument {
    pub doc_id: String,
    pub text: String,
    pub source_path: PathBuf,
    /// Set when the source file held no non-whitespace text.
    #[serde(default)]
    pub empty_text: bool,
}

impl JudgmentDocument {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let empty_text = text.trim().is_empty();
        Self {
            doc_id: doc_id.into(),
            text,
            source_path: PathBuf::new(),
            empty_text,
        }
    }
}

/// A file that could not be turned into a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IngestFailure {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Default, Clone)]
pub struct IngestReport {
    pub documents: Vec<JudgmentDocument>,
    pub failures: Vec<IngestFailure>,
}

/// Derives a document id from a file name: the lowercased stem with path
/// separators replaced.
pub fn doc_id_for(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    let id: String = stem
        .to_lowercase()
        .chars()
        .map(|c| if c == '/' || c == '\\' { '_' } else { c })
        .collect();
    if id.trim().is_empty() {
        None
    } else {
        Some(id)
    }
}

fn has_text_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| TEXT_EXTENSIONS.iter().any(|t| t.eq_ignore_ascii_case(e)))
        .unwrap_or(false)
}

/// Reads every text file directly inside `directory`, one document per file,
/// ordered by `doc_id`.
///
/// Files that fail to decode (or collide on `doc_id`) are reported in
/// [`IngestReport::failures`] and do not abort the run.
pub fn ingest_raw(directory: &Path) -> Result<IngestReport, CorpusError> {
    let unreadable = |source| CorpusError::UnreadableDirectory {
        path: directory.to_path_buf(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(directory).map_err(unreadable)? {
        let entry = entry.map_err(unreadable)?;
        let path = entry.path();
        let is_file = entry.file_type().map(|t| t.is_file()).unwrap_or(false);
        if is_file && has_text_extension(&path) {
            paths.push(path);
        }
    }
    // Sorting paths first makes collision resolution independent of
    // directory iteration order.
    paths.sort();

    let mut report = IngestReport::default();
    let mut by_id: BTreeMap<String, JudgmentDocument> = BTreeMap::new();
    for path in paths {
        let Some(doc_id) = doc_id_for(&path) else {
            report.failures.push(IngestFailure {
                path,
                reason: "file name yields an empty doc_id".into(),
            });
            continue;
        };
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) => {
                report.failures.push(IngestFailure {
                    path,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let text = match String::from_utf8(bytes) {
            Ok(t) => t,
            Err(e) => {
                report.failures.push(IngestFailure {
                    path,
                    reason: format!("not valid UTF-8: {e}"),
                });
                continue;
            }
        };
        if by_id.contains_key(&doc_id) {
            report.failures.push(IngestFailure {
                path,
                reason: format!("doc_id `{doc_id}` already taken by another file"),
            });
            continue;
        }
        let empty_text = text.trim().is_empty();
        by_id.insert(
            doc_id.clone(),
            JudgmentDocument {
                doc_id,
                text,
                source_path: path,
                empty_text,
            },
        );
    }
    report.documents = by_id.into_values().collect();
    Ok(report)
}

/// Writes documents as JSON lines.
pub fn write_corpus_jsonl(docs: &[JudgmentDocument], path: &Path) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).expect("document serializes");
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn read_corpus_jsonl(path: &Path) -> Result<Vec<JudgmentDocument>, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut docs: Vec<JudgmentDocument> = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: JudgmentDocument =
            serde_json::from_str(&line).map_err(|e| CorpusError::BadCorpusLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })?;
        if doc.doc_id.is_empty() || !seen.insert(doc.doc_id.clone()) {
            return Err(CorpusError::BadCorpusLine {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("empty or duplicate doc_id `{}`", doc.doc_id),
            });
        }
        docs.push(doc);
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    Ok(docs)
}

/// Loads a corpus from either a directory of raw text files or a JSONL file
/// written by [`write_corpus_jsonl`].
pub fn load_corpus(path: &Path) -> Result<IngestReport, CorpusError> {
    if path.is_dir() {
        ingest_raw(path)
    } else {
        Ok(IngestReport {
            documents: read_corpus_jsonl(path)?,
            failures: Vec::new(),
        })
    }
}

/// A judgment date: ISO when it could be parsed, verbatim otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CaseDate {
    Iso(NaiveDate),
    Raw(String),
}

const DATE_FORMATS: &[&str] = &[
    "%Y-%m-%d",
    "%d-%m-%Y",
    "%d/%m/%Y",
    "%d.%m.%Y",
    "%d %B, %Y",
    "%d %B %Y",
    "%B %d, %Y",
    "%d %b, %Y",
    "%d %b %Y",
    "%b %d, %Y",
];

impl CaseDate {
    pub fn parse(raw: &str) -> Self {
        let trimmed = raw.trim();
        for fmt in DATE_FORMATS {
            if let Ok(date) = NaiveDate::parse_from_str(trimmed, fmt) {
                return CaseDate::Iso(date);
            }
        }
        CaseDate::Raw(raw.to_string())
    }

    pub fn as_iso(&self) -> Option<NaiveDate> {
        match self {
            CaseDate::Iso(d) => Some(*d),
            CaseDate::Raw(_) => None,
        }
    }

    /// Sort key: parsed dates chronologically, then unparsed strings.
    pub fn sort_key(&self) -> (u8, String) {
        match self {
            CaseDate::Iso(d) => (0, d.format("%Y-%m-%d").to_string()),
            CaseDate::Raw(s) => (1, s.clone()),
        }
    }
}

impl Default for CaseDate {
    fn default() -> Self {
        CaseDate::Raw(String::new())
    }
}

impl fmt::Display for CaseDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CaseDate::Iso(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            CaseDate::Raw(s) => f.write_str(s),
        }
    }
}

impl Serialize for CaseDate {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for CaseDate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        Ok(CaseDate::parse(&raw))
    }
}

/// The eleven structured fields extracted from one judgment.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub doc_id: String,
    pub case_name: String,
    pub date: CaseDate,
    pub appellant: String,
    pub respondent: String,
    pub judges: Vec<String>,
    pub citations: Vec<String>,
    pub related_provisions: Vec<String>,
    pub case_type: String,
    pub judgement: String,
    pub summary: String,
    pub outcome_of_appellant: String,
}

impl AnnotationRecord {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.doc_id.trim().is_empty() {
            return Err(CorpusError::InvalidRecord {
                doc_id: self.doc_id.clone(),
                field: "doc_id",
                message: "must not be empty".into(),
            });
        }
        for (field, items) in [
            ("judges", &self.judges),
            ("citations", &self.citations),
            ("related_provisions", &self.related_provisions),
        ] {
            if items.iter().any(|item| item.is_empty()) {
                return Err(CorpusError::InvalidRecord {
                    doc_id: self.doc_id.clone(),
                    field,
                    message: "contains an empty list item".into(),
                });
            }
        }
        Ok(())
    }
}

/// Joins list items into one cell, escaping `\` and `;` inside items.
pub fn encode_list(items: &[String]) -> String {
    let escaped: Vec<String> = items
        .iter()
        .map(|item| item.replace('\\', "\\\\").replace(';', "\\;"))
        .collect();
    escaped.join(LIST_DELIMITER)
}

/// Inverse of [`encode_list`].
pub fn decode_list(cell: &str) -> Result<Vec<String>, String> {
    if cell.is_empty() {
        return Ok(Vec::new());
    }
    let mut items = Vec::new();
    let mut current = String::new();
    let mut chars = cell.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(next @ ('\\' | ';')) => current.push(next),
                Some(other) => return Err(format!("invalid escape `\\{other}`")),
                None => return Err("dangling escape at end of cell".into()),
            },
            ';' => {
                if chars.next() != Some(' ') {
                    return Err("list delimiter `;` must be followed by a space".into());
                }
                items.push(std::mem::take(&mut current));
            }
            other => current.push(other),
        }
    }
    items.push(current);
    if items.iter().any(|i| i.is_empty()) {
        return Err("empty list item".into());
    }
    Ok(items)
}

fn record_to_row(r: &AnnotationRecord) -> [String; 12] {
    [
        r.doc_id.clone(),
        r.case_name.clone(),
        r.date.to_string(),
        r.appellant.clone(),
        r.respondent.clone(),
        encode_list(&r.judges),
        encode_list(&r.citations),
        encode_list(&r.related_provisions),
        r.case_type.clone(),
        r.judgement.clone(),
        r.summary.clone(),
        r.outcome_of_appellant.clone(),
    ]
}

/// Writes annotations as RFC-4180 CSV with the fixed header.
pub fn save_annotations(records: &[AnnotationRecord], path: &Path) -> Result<(), CorpusError> {
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        r.validate()?;
        if !seen.insert(r.doc_id.as_str()) {
            return Err(CorpusError::DuplicateDocId {
                doc_id: r.doc_id.clone(),
                row: i + 1,
            });
        }
    }
    let file = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = csv::WriterBuilder::new()
        .quote_style(csv::QuoteStyle::Necessary)
        .from_writer(BufWriter::new(file));
    writer.write_record(ANNOTATION_HEADER)?;
    for r in records {
        writer.write_record(record_to_row(r))?;
    }
    writer.flush().map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads an annotation CSV. Row numbers in errors are 1-based data rows.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_annotations(file)
}

pub fn read_annotations<R: io::Read>(reader: R) -> Result<Vec<AnnotationRecord>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.len() != ANNOTATION_HEADER.len()
        || header.iter().zip(ANNOTATION_HEADER).any(|(a, b)| a != b)
    {
        return Err(CorpusError::BadHeader);
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| CorpusError::MalformedRow {
            row: row_no,
            field: "<row>".into(),
            message: e.to_string(),
        })?;
        if row.len() != ANNOTATION_HEADER.len() {
            let field = ANNOTATION_HEADER
                .get(row.len())
                .copied()
                .unwrap_or("<extra>");
            return Err(CorpusError::MalformedRow {
                row: row_no,
                field: field.into(),
                message: format!(
                    "expected {} fields, found {}",
                    ANNOTATION_HEADER.len(),
                    row.len()
                ),
            });
        }
        let cell = |idx: usize| row.get(idx).unwrap_or_default().to_string();
        let list = |idx: usize| {
            decode_list(row.get(idx).unwrap_or_default()).map_err(|message| {
                CorpusError::MalformedRow {
                    row: row_no,
                    field: ANNOTATION_HEADER[idx].into(),
                    message,
                }
            })
        };
        let doc_id = cell(0);
        if doc_id.trim().is_empty() {
            return Err(CorpusError::MalformedRow {
                row: row_no,
                field: "doc_id".into(),
                message: "empty doc_id".into(),
            });
        }
        if !seen.insert(doc_id.clone()) {
            return Err(CorpusError::DuplicateDocId {
                doc_id,
                row: row_no,
            });
        }
        records.push(AnnotationRecord {
            doc_id,
            case_name: cell(1),
            date: CaseDate::parse(&cell(2)),
            appellant: cell(3),
            respondent: cell(4),
            judges: list(5)?,
            citations: list(6)?,
            related_provisions: list(7)?,
            case_type: cell(8),
            judgement: cell(9),
            summary: cell(10),
            outcome_of_appellant: cell(11),
        });
    }
    Ok(records)
}

/// Checks that every annotation refers to a document of `docs`.
pub fn check_linkage(
    records: &[AnnotationRecord],
    docs: &[JudgmentDocument],
) -> Result<(), CorpusError> {
    let ids: HashSet<&str> = docs.iter().map(|d| d.doc_id.as_str()).collect();
    match records.iter().find(|r| !ids.contains(r.doc_id.as_str())) {
        Some(r) => Err(CorpusError::UnknownDocument {
            doc_id: r.doc_id.clone(),
        }),
        None => Ok(()),
    }
}

/// Annotations indexed by `doc_id`.
#[derive(Debug, Clone, Default)]
pub struct AnnotationStore {
    records: Vec<AnnotationRecord>,
    by_id: HashMap<String, usize>,
}

impl AnnotationStore {
    pub fn new(records: Vec<AnnotationRecord>) -> Self {
        let by_id = records
            .iter()
            .enumerate()
            .map(|(i, r)| (r.doc_id.clone(), i))
            .collect();
        Self { records, by_id }
    }

    pub fn get(&self, doc_id: &str) -> Option<&AnnotationRecord> {
        self.by_id.get(doc_id).map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[AnnotationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Case-type counts, ordered by descending count then label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CaseTypeDistribution(Vec<(String, usize)>);

impl CaseTypeDistribution {
    pub fn entries(&self) -> &[(String, usize)] {
        &self.0
    }

    pub fn get(&self, case_type: &str) -> Option<usize> {
        self.0.iter().find(|(t, _)| t == case_type).map(|(_, c)| *c)
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|(_, c)| c).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for CaseTypeDistribution {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (label, count) in &self.0 {
            map.serialize_entry(label, count)?;
        }
        map.end()
    }
}

impl fmt::Display for CaseTypeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.0.iter().map(|(t, _)| t.len()).max().unwrap_or(9).max(9);
        writeln!(f, "{:<width$}  Count", "Case Type")?;
        for (label, count) in &self.0 {
            writeln!(f, "{label:<width$}  {count}")?;
        }
        Ok(())
    }
}

pub fn case_type_distribution<'a, I>(records: I) -> CaseTypeDistribution
where
    I: IntoIterator<Item = &'a AnnotationRecord>,
{
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for r in records {
        *counts.entry(r.case_type.as_str()).or_default() += 1;
    }
    let mut entries: Vec<(String, usize)> =
        counts.into_iter().map(|(t, c)| (t.to_string(), c)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    CaseTypeDistribution(entries)
}
