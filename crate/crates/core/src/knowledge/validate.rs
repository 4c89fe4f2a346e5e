use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{FunctionExpr, NounPhrase, StrategyFrame};
use crate::text::phrase_key;
use crate::verbs::is_gerund_token;

/// Longest verb phrase accepted in a verb slot ("acting as" is two tokens).
const MAX_VERB_TOKENS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    IdEmpty,
    BehaviorSummaryEmpty,
    FunctionsEmpty,
    CharacteristicsEmpty,
    NotGerund,
    EmptyField,
    VerbTooLong,
    CausalWithoutSteps,
    CauseOutOfRange,
    ConjunctionEmpty,
    DuplicatePhrase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            path: path.into(),
            message: message.into(),
        });
    }
}

/// Checks every frame invariant; violations are returned as data in slot order.
pub fn validate_frame(frame: &StrategyFrame) -> ValidationReport {
    let mut report = ValidationReport::default();

    if frame.id.0.trim().is_empty() {
        report.push(ViolationCode::IdEmpty, "/id", "frame id is empty");
    }

    let behavior = &frame.behavior;
    if behavior.summary.trim().is_empty() {
        report.push(
            ViolationCode::BehaviorSummaryEmpty,
            "/behavior/summary",
            "behavior summary is empty",
        );
    }
    for (i, step) in behavior.steps.iter().enumerate() {
        check_function(step, &format!("/behavior/steps/{i}"), &mut report);
    }
    if behavior.steps.is_empty() && !behavior.causal_links.is_empty() {
        report.push(
            ViolationCode::CausalWithoutSteps,
            "/behavior/causal_links",
            "causal links need temporal steps to reference",
        );
    }
    for (i, link) in behavior.causal_links.iter().enumerate() {
        let path = format!("/behavior/causal_links/{i}");
        let range = link.cause;
        if range.start >= range.end || range.end > behavior.steps.len() {
            report.push(
                ViolationCode::CauseOutOfRange,
                format!("{path}/cause"),
                format!(
                    "cause range {}..{} outside steps 0..{}",
                    range.start,
                    range.end,
                    behavior.steps.len()
                ),
            );
        }
        if link.conjunction.trim().is_empty() {
            report.push(
                ViolationCode::ConjunctionEmpty,
                format!("{path}/conjunction"),
                "causal conjunction is empty",
            );
        }
        check_function(&link.effect, &format!("{path}/effect"), &mut report);
    }

    if frame.functions.is_empty() {
        report.push(
            ViolationCode::FunctionsEmpty,
            "/functions",
            "at least one function is required",
        );
    }
    let mut seen = HashSet::new();
    for (i, f) in frame.functions.iter().enumerate() {
        let path = format!("/functions/{i}");
        check_function(f, &path, &mut report);
        if !seen.insert(phrase_key(&f.phrase())) {
            report.push(
                ViolationCode::DuplicatePhrase,
                path,
                format!("duplicate function {:?}", f.phrase()),
            );
        }
    }

    if frame.characteristics.is_empty() {
        report.push(
            ViolationCode::CharacteristicsEmpty,
            "/characteristics",
            "at least one characteristic is required",
        );
    }
    let mut seen = HashSet::new();
    for (i, c) in frame.characteristics.iter().enumerate() {
        let path = format!("/characteristics/{i}");
        check_noun_phrase(c, &path, &mut report);
        if !seen.insert(phrase_key(&c.phrase())) {
            report.push(
                ViolationCode::DuplicatePhrase,
                path,
                format!("duplicate characteristic {:?}", c.phrase()),
            );
        }
    }

    if let Some(env) = &frame.environment {
        check_noun_phrase(env, "/environment", &mut report);
    }
    report
}

fn check_function(f: &FunctionExpr, path: &str, report: &mut ValidationReport) {
    for (field, value) in f.noun_fields() {
        if value.trim().is_empty() {
            report.push(
                ViolationCode::EmptyField,
                format!("{path}/{field}"),
                format!("{field} is empty"),
            );
        }
    }
    let Some(verb) = f.verb() else { return };
    let field = match f {
        FunctionExpr::State { .. } => "change_verb",
        _ => "verb",
    };
    let tokens: Vec<&str> = verb.split_whitespace().collect();
    match tokens.first() {
        None => report.push(
            ViolationCode::EmptyField,
            format!("{path}/{field}"),
            format!("{field} is empty"),
        ),
        Some(lead) => {
            if tokens.len() > MAX_VERB_TOKENS {
                report.push(
                    ViolationCode::VerbTooLong,
                    format!("{path}/{field}"),
                    format!("{verb:?} is longer than {MAX_VERB_TOKENS} tokens"),
                );
            }
            if !is_gerund_token(lead) {
                let hint = crate::verbs::gerundize(&f.phrase())
                    .map(|g| format!("; expected {g:?}"))
                    .unwrap_or_default();
                report.push(
                    ViolationCode::NotGerund,
                    path.to_string(),
                    format!("{:?} is not in gerund form{hint}", f.phrase()),
                );
            }
        }
    }
}

fn check_noun_phrase(np: &NounPhrase, path: &str, report: &mut ValidationReport) {
    if np.head.trim().is_empty() {
        report.push(
            ViolationCode::EmptyField,
            format!("{path}/head"),
            "head noun is empty",
        );
    }
    for (i, a) in np.attributives.iter().enumerate() {
        if a.trim().is_empty() {
            report.push(
                ViolationCode::EmptyField,
                format!("{path}/attributives/{i}"),
                "attributive is empty",
            );
        }
    }
}
