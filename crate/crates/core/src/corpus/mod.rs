//! Corpus pipeline: documents in, reviewed multi-label sentences and training
//! samples out.

mod classify;
mod review;
mod samples;
mod segment;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use classify::{
    classify, classify_all, FixedLabels, LabelSource, LabeledSentence, LexiconClassifier,
    Classifier, Scores, DEFAULT_THRESHOLD,
};
pub use review::{
    audit_size, build_review_batches, record_verdict, review_loop_step, run_review_loop,
    Auditor, BatchStatus, ConstantAuditor, GoldAuditor, PendingAuditor, ReviewBatch, StepReport,
    Verdict, BATCH_SIZE, DEFAULT_MAX_ROUNDS,
};
pub use samples::{generate_samples, AugmentedSample, Paraphraser, SampleSet};
pub use segment::{segment, sentence_id, SentenceRecord, Span};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CorpusError {
    #[error("EMPTY_DOCUMENT: document {0:?} has no text")]
    EmptyDocument(String),
    #[error("CLASSIFIER_UNAVAILABLE: {0}")]
    ClassifierUnavailable(String),
    #[error("BAD_THRESHOLD: {0} is not inside (0, 1)")]
    BadThreshold(f64),
    #[error("BAD_RATIO: ratio_real {0} is not inside [0, 1]")]
    BadRatio(f64),
    #[error("INSUFFICIENT_CORPUS: need {needed} reviewed sentences, have {available}")]
    InsufficientCorpus { needed: usize, available: usize },
    #[error("PARAPHRASE_FAILED: {0}")]
    ParaphraseFailed(String),
    #[error("NOT_AUDITED: {id} is not in the audit sample of batch {batch_no}")]
    NotAudited { batch_no: u32, id: String },
    #[error("UNKNOWN_BATCH: no batch {0}")]
    UnknownBatch(u32),
    #[error("MAX_ROUNDS_EXCEEDED: batches {dirty:?} still not clean after {rounds} rounds")]
    MaxRoundsExceeded { rounds: u32, dirty: Vec<u32> },
    #[error("BAD_RECORD: line {line}: {message}")]
    BadRecord { line: usize, message: String },
}

impl CorpusError {
    pub fn code(&self) -> &'static str {
        match self {
            CorpusError::EmptyDocument(_) => "EMPTY_DOCUMENT",
            CorpusError::ClassifierUnavailable(_) => "CLASSIFIER_UNAVAILABLE",
            CorpusError::BadThreshold(_) => "BAD_THRESHOLD",
            CorpusError::BadRatio(_) => "BAD_RATIO",
            CorpusError::InsufficientCorpus { .. } => "INSUFFICIENT_CORPUS",
            CorpusError::ParaphraseFailed(_) => "PARAPHRASE_FAILED",
            CorpusError::NotAudited { .. } => "NOT_AUDITED",
            CorpusError::UnknownBatch(_) => "UNKNOWN_BATCH",
            CorpusError::MaxRoundsExceeded { .. } => "MAX_ROUNDS_EXCEEDED",
            CorpusError::BadRecord { .. } => "BAD_RECORD",
        }
    }
}

/// One ingested document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusDoc {
    pub doc_id: String,
    pub text: String,
}

/// Reads line-delimited `{"doc_id", "text"}` records; blank lines are skipped.
pub fn parse_corpus_jsonl(input: &str) -> Result<Vec<CorpusDoc>, CorpusError> {
    input
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| CorpusError::BadRecord {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LabeledRecord {
    id: String,
    text: String,
    labels: Vec<crate::knowledge::Dimension>,
    scores: Scores,
    source: LabelSource,
}

/// Line-delimited export: `{"id","text","labels","scores","source"}` per sentence.
pub fn export_labeled_jsonl(labeled: &[LabeledSentence]) -> String {
    let mut out = String::new();
    for l in labeled {
        let rec = LabeledRecord {
            id: l.sentence.id.clone(),
            text: l.sentence.text.clone(),
            labels: l.labels.clone(),
            scores: l.scores,
            source: l.label_source,
        };
        out.push_str(&serde_json::to_string(&rec).expect("labeled records serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_lines() {
        let docs = parse_corpus_jsonl("{\"doc_id\":\"a\",\"text\":\"x.\"}\n\n").unwrap();
        assert_eq!(docs.len(), 1);
        let err = parse_corpus_jsonl("{\"doc\":1}").unwrap_err();
        assert_eq!(err.code(), "BAD_RECORD");
    }

    #[test]
    fn export_shape() {
        let s = SentenceRecord::standalone("s1", "The tail fin generates thrust.");
        let l = classify(&s, &LexiconClassifier::default(), 0.5).unwrap();
        let line = export_labeled_jsonl(&[l]);
        let v: serde_json::Value = serde_json::from_str(line.trim()).unwrap();
        assert_eq!(v["labels"], serde_json::json!(["Function"]));
        assert_eq!(v["source"], "Lexicon");
        assert!(v["scores"]["Environment"].is_number());
    }
}
