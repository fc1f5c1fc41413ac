//! Model-assisted extraction of the structured annotation fields.

use thiserror::Error;

use crate::corpus::{AnnotationRecord, CaseDate, JudgmentDocument};
use crate::providers::{generate, FailureKind, GenerationRequest, ProviderError, TextGenerator};

/// Separates the instructions from the judgment text in an annotation prompt.
pub const JUDGMENT_MARKER: &str = "\n\nJudgment:\n";

pub const ANNOTATION_INSTRUCTIONS: &str = "Read the Indian court judgment below and reply with exactly these lines, \
leaving a value empty when the judgment does not state it. Separate list items with \"; \".\n\
CASE NAME:\nDATE:\nAPPELLANT:\nRESPONDENT:\nJUDGES:\nCITATIONS:\nRELATED PROVISIONS:\nCASE TYPE:\n\
JUDGEMENT:\nSUMMARY:\nOUTCOME OF APPELLANT:";

const LABELS: [&str; 11] = [
    "CASE NAME",
    "DATE",
    "APPELLANT",
    "RESPONDENT",
    "JUDGES",
    "CITATIONS",
    "RELATED PROVISIONS",
    "CASE TYPE",
    "JUDGEMENT",
    "SUMMARY",
    "OUTCOME OF APPELLANT",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("annotation of `{doc_id}` failed: {source}")]
    Provider {
        doc_id: String,
        #[source]
        source: ProviderError,
    },
    #[error("annotation reply for `{doc_id}` has no recognizable fields")]
    Unparseable { doc_id: String },
}

pub fn annotation_prompt(judgment: &str) -> String {
    format!("{ANNOTATION_INSTRUCTIONS}{JUDGMENT_MARKER}{judgment}")
}

fn split_items(value: &str) -> Vec<String> {
    value
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Reads a labeled-line reply. Unknown lines continue the previous field;
/// missing fields stay empty. Returns `None` if no label was found.
pub fn parse_annotation(doc_id: &str, reply: &str) -> Option<AnnotationRecord> {
    let mut values: [Option<String>; 11] = Default::default();
    let mut current: Option<usize> = None;
    for line in reply.lines() {
        let trimmed = line.trim();
        let labeled = LABELS.iter().enumerate().find_map(|(i, label)| {
            let rest = trimmed.strip_prefix(label)?.strip_prefix(':')?;
            Some((i, rest.trim()))
        });
        match (labeled, current) {
            (Some((i, rest)), _) => {
                values[i] = Some(rest.to_string());
                current = Some(i);
            }
            (None, Some(i)) if !trimmed.is_empty() => {
                let v = values[i].get_or_insert_with(String::new);
                if !v.is_empty() {
                    v.push(' ');
                }
                v.push_str(trimmed);
            }
            _ => {}
        }
    }
    if values.iter().all(Option::is_none) {
        return None;
    }
    let [case_name, date, appellant, respondent, judges, citations, provisions, case_type, judgement, summary, outcome] =
        values.map(Option::unwrap_or_default);
    Some(AnnotationRecord {
        doc_id: doc_id.to_string(),
        case_name,
        date: CaseDate::parse(&date),
        appellant,
        respondent,
        judges: split_items(&judges),
        citations: split_items(&citations),
        related_provisions: split_items(&provisions),
        case_type,
        judgement,
        summary,
        outcome_of_appellant: outcome,
    })
}

pub fn annotate_document(
    doc: &JudgmentDocument,
    generator: &dyn TextGenerator,
) -> Result<AnnotationRecord, AnnotateError> {
    let provider_err = |source| AnnotateError::Provider {
        doc_id: doc.doc_id.clone(),
        source,
    };
    let request = GenerationRequest::with_prompt(annotation_prompt(&doc.text))
        .map_err(|k: FailureKind| provider_err(ProviderError::immediate(k)))?;
    let reply = generate(generator, &request).map_err(provider_err)?;
    parse_annotation(&doc.doc_id, &reply).ok_or_else(|| AnnotateError::Unparseable {
        doc_id: doc.doc_id.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::mock::{AnnotationGenerator, FailingGenerator, FixedGenerator};

    const JUDGMENT: &str = "Ramesh Kumar vs State Of Punjab on 12 March, 1998\n\
Before: Hon'ble Justice A. Sen; Hon'ble Justice B. Rao\n\
\n\
The appellant was convicted under Section 302 of the Indian Penal Code. \
Reliance was placed on AIR 1985 SC 1618. The appeal is dismissed.";

    #[test]
    fn parses_labeled_reply() {
        let reply = "CASE NAME: A vs B\nDATE: 1998-03-12\nJUDGES: X; Y\nCITATIONS:\nSUMMARY: First line\ncontinues here.\nnoise before labels is ignored";
        let r = parse_annotation("d1", reply).unwrap();
        assert_eq!(r.case_name, "A vs B");
        assert_eq!(r.date.to_string(), "1998-03-12");
        assert_eq!(r.judges, ["X", "Y"]);
        assert!(r.citations.is_empty());
        assert_eq!(r.summary, "First line continues here. noise before labels is ignored");
        assert!(r.validate().is_ok());
        assert!(parse_annotation("d1", "nothing useful").is_none());
    }

    #[test]
    fn mock_annotator_round_trip() {
        let doc = JudgmentDocument::new("ramesh", JUDGMENT);
        let r = annotate_document(&doc, &AnnotationGenerator).unwrap();
        assert_eq!(r.case_name, "Ramesh Kumar vs State Of Punjab");
        assert_eq!(r.appellant, "Ramesh Kumar");
        assert_eq!(r.respondent, "State Of Punjab");
        assert_eq!(r.date.to_string(), "1998-03-12");
        assert_eq!(r.judges, ["A. Sen", "B. Rao"]);
        assert_eq!(r.citations, ["AIR 1985 SC 1618"]);
        assert_eq!(r.related_provisions, ["Section 302 of the Indian Penal Code"]);
        assert_eq!(r.case_type, "Criminal");
        assert_eq!(r.outcome_of_appellant, "Dismissed");
    }

    #[test]
    fn failures_are_reported_per_document() {
        let doc = JudgmentDocument::new("d", JUDGMENT);
        assert!(matches!(
            annotate_document(&doc, &FailingGenerator::unreachable()),
            Err(AnnotateError::Provider { .. })
        ));
        let junk = FixedGenerator { text: "sorry".into() };
        assert!(matches!(
            annotate_document(&doc, &junk),
            Err(AnnotateError::Unparseable { .. })
        ));
    }
}
