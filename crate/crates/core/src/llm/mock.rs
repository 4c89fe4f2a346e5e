use std::collections::BTreeSet;

use serde::Deserialize;
use serde_json::json;

use super::correct::CorrectionPayload;
use super::{Backend, LlmError, LlmRequest, RawReply, TaskKind, Usage};
use crate::inversion::{find_terms, replace_terms, RuleVerdict};
use crate::knowledge::Dimension;
use crate::text::{match_capital, word_spans, words};

#[derive(Debug, Clone, Deserialize)]
struct SummaryRule {
    all_of: Vec<String>,
    summary: String,
}

#[derive(Debug, Clone, Deserialize)]
struct MockTable {
    label_keywords: std::collections::BTreeMap<String, Vec<Dimension>>,
    synonym_rings: Vec<Vec<String>>,
    summaries: Vec<SummaryRule>,
}

/// Offline backend driven by a keyword/synonym/summary table. Pure: the
/// same task always yields the same reply.
#[derive(Debug, Clone)]
pub struct MockBackend {
    table: MockTable,
}

static BUNDLED: &str = include_str!("../../data/mock-llm.json");

impl MockBackend {
    /// The table shipped with the crate, tuned to the demo corpus.
    pub fn bundled() -> Self {
        MockBackend::from_json(BUNDLED).expect("bundled mock table is valid")
    }

    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        Ok(MockBackend {
            table: serde_json::from_str(doc)?,
        })
    }

    pub fn from_file(path: &std::path::Path) -> std::io::Result<Self> {
        let doc = std::fs::read_to_string(path)?;
        MockBackend::from_json(&doc).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    fn label(&self, text: &str) -> serde_json::Value {
        let keys: Vec<&str> = self.table.label_keywords.keys().map(String::as_str).collect();
        let mut labels = BTreeSet::new();
        for hit in find_terms(text, &keys) {
            labels.extend(self.table.label_keywords[keys[hit.term]].iter().map(|d| d.as_str()));
        }
        json!({ "labels": labels })
    }

    /// Replaces each ring member with the next member of its ring.
    fn paraphrase(&self, text: &str) -> serde_json::Value {
        let mut out = String::with_capacity(text.len());
        let mut cursor = 0;
        for (a, b) in word_spans(text) {
            let w = text[a..b].to_lowercase();
            let next = self.table.synonym_rings.iter().find_map(|ring| {
                ring.iter()
                    .position(|r| *r == w)
                    .map(|i| ring[(i + 1) % ring.len()].clone())
            });
            if let Some(next) = next {
                out.push_str(&text[cursor..a]);
                out.push_str(&match_capital(&next, &text[a..b]));
                cursor = b;
            }
        }
        out.push_str(&text[cursor..]);
        json!({ "text": out })
    }

    fn summarize(&self, payload: &str) -> serde_json::Value {
        let present: BTreeSet<String> = words(payload).into_iter().collect();
        let summary = self
            .table
            .summaries
            .iter()
            .find(|r| r.all_of.iter().all(|w| present.contains(&w.to_lowercase())))
            .map(|r| r.summary.clone())
            .unwrap_or_else(|| {
                let first = payload.lines().next().unwrap_or_default();
                first.trim().trim_end_matches(['.', '!', '?']).to_string()
            });
        json!({ "summary": summary })
    }

    /// Replays KB mappings, then disallowed-pair rules, on every slot.
    fn correct(&self, payload: &str) -> Result<serde_json::Value, LlmError> {
        let p: CorrectionPayload = serde_json::from_str(payload)
            .map_err(|e| LlmError::Transport(format!("mock could not read payload: {e}")))?;
        let pairs: Vec<(&str, &str)> = p
            .mappings
            .iter()
            .map(|m| (m.bio_term.as_str(), m.eng_term.as_str()))
            .collect();
        let mapped: Vec<(String, Vec<String>)> = p
            .units
            .iter()
            .map(|u| {
                let (text, done) = replace_terms(&u.text, &pairs);
                let why = done
                    .iter()
                    .map(|r| {
                        format!(
                            "{:?} maps to the engineering term {:?}",
                            p.mappings[r.pair].bio_term, p.mappings[r.pair].eng_term
                        )
                    })
                    .collect();
                (text, why)
            })
            .collect();

        let contains = |text: &str, term: &str| !find_terms(text, &[term]).is_empty();
        let mut changes = Vec::new();
        for (unit, (text, mut why)) in p.units.iter().zip(mapped.iter().cloned()) {
            let mut text = text;
            for rule in p.rules.iter().filter(|r| r.verdict == RuleVerdict::Disallowed) {
                let Some(suggestion) = &rule.suggestion else { continue };
                let [first, second] = &rule.terms;
                let first_present = mapped.iter().any(|(t, _)| contains(t, first));
                if first_present && contains(&text, second) {
                    text = replace_terms(&text, &[(second.as_str(), suggestion.as_str())]).0;
                    why.push(format!("{second:?} conflicts with {first:?}: {}", rule.rationale));
                }
            }
            if text != unit.text {
                changes.push(json!({
                    "path": unit.path,
                    "before": unit.text,
                    "after": text,
                    "justification": why.join("; "),
                }));
            }
        }
        Ok(json!({ "changes": changes }))
    }
}

impl Backend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn send(&self, request: &LlmRequest<'_>) -> Result<RawReply, LlmError> {
        let payload = &request.task.payload;
        let reply = match request.task.kind {
            TaskKind::Label => self.label(payload),
            TaskKind::Paraphrase => self.paraphrase(payload),
            TaskKind::Summarize => self.summarize(payload),
            TaskKind::Correct => self.correct(payload)?,
        };
        let text = reply.to_string();
        Ok(RawReply {
            usage: Usage {
                prompt_tokens: request.prompt.split_whitespace().count() as u64,
                completion_tokens: text.split_whitespace().count() as u64,
            },
            text,
        })
    }
}
