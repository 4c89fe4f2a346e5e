use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    Behavior, CausalRelation, Characteristic, ElementaryId, EnvironmentDesc, FrameId,
    FunctionExpr, Provenance, StepRange, StrategyFrame,
};
use crate::text::phrase_key;

/// Any subset of frame slots extracted from a few source sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameFragment {
    #[serde(default)]
    pub summary: Option<String>,
    #[serde(default)]
    pub steps: Vec<FunctionExpr>,
    #[serde(default)]
    pub causal_links: Vec<CausalRelation>,
    #[serde(default)]
    pub functions: Vec<FunctionExpr>,
    #[serde(default)]
    pub characteristics: Vec<Characteristic>,
    #[serde(default)]
    pub environment: Option<EnvironmentDesc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementaryStrategy {
    pub id: ElementaryId,
    #[serde(default)]
    pub sentences: Vec<String>,
    pub fragment: FrameFragment,
}

impl ElementaryStrategy {
    /// Wraps a whole frame as a single operand, e.g. to re-compose a composite.
    pub fn from_frame(id: ElementaryId, frame: &StrategyFrame) -> Self {
        ElementaryStrategy {
            id,
            sentences: frame.provenance.sentence_ids.clone(),
            fragment: FrameFragment {
                summary: Some(frame.behavior.summary.clone()).filter(|s| !s.trim().is_empty()),
                steps: frame.behavior.steps.clone(),
                causal_links: frame.behavior.causal_links.clone(),
                functions: frame.functions.clone(),
                characteristics: frame.characteristics.clone(),
                environment: frame.environment.clone(),
            },
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComposeError {
    #[error("compose needs at least one elementary strategy")]
    NoParts,
    #[error("CONFLICTING_ENVIRONMENT: {first} defines {first_env:?} but {second} defines {second_env:?}")]
    ConflictingEnvironment {
        first: ElementaryId,
        first_env: String,
        second: ElementaryId,
        second_env: String,
    },
}

impl ComposeError {
    pub fn code(&self) -> &'static str {
        match self {
            ComposeError::NoParts => "NO_PARTS",
            ComposeError::ConflictingEnvironment { .. } => "CONFLICTING_ENVIRONMENT",
        }
    }
}

/// The ⊕ operator: slot-wise union of elementary strategies in argument order.
///
/// Functions and characteristics are concatenated with duplicate phrases
/// dropped; temporal steps are concatenated and causal links re-indexed; the
/// first environment wins and any differing one is a conflict.
pub fn compose(parts: &[ElementaryStrategy]) -> Result<StrategyFrame, ComposeError> {
    if parts.is_empty() {
        return Err(ComposeError::NoParts);
    }

    let mut summary: Option<String> = None;
    let mut steps: Vec<FunctionExpr> = Vec::new();
    let mut links: Vec<CausalRelation> = Vec::new();
    let mut functions: Vec<FunctionExpr> = Vec::new();
    let mut characteristics: Vec<Characteristic> = Vec::new();
    let mut environment: Option<(ElementaryId, EnvironmentDesc)> = None;
    let mut provenance = Provenance::default();
    let mut seen_functions = HashSet::new();
    let mut seen_characteristics = HashSet::new();

    for part in parts {
        let frag = &part.fragment;
        if summary.is_none() {
            summary = frag.summary.clone().filter(|s| !s.trim().is_empty());
        }
        let offset = steps.len();
        steps.extend(frag.steps.iter().cloned());
        links.extend(frag.causal_links.iter().map(|l| CausalRelation {
            cause: StepRange {
                start: l.cause.start + offset,
                end: l.cause.end + offset,
            },
            ..l.clone()
        }));
        for f in &frag.functions {
            if seen_functions.insert(phrase_key(&f.phrase())) {
                functions.push(f.clone());
            }
        }
        for c in &frag.characteristics {
            if seen_characteristics.insert(phrase_key(&c.phrase())) {
                characteristics.push(c.clone());
            }
        }
        if let Some(env) = &frag.environment {
            match &environment {
                None => environment = Some((part.id, env.clone())),
                Some((owner, existing)) => {
                    if phrase_key(&existing.phrase()) != phrase_key(&env.phrase()) {
                        return Err(ComposeError::ConflictingEnvironment {
                            first: *owner,
                            first_env: existing.phrase(),
                            second: part.id,
                            second_env: env.phrase(),
                        });
                    }
                }
            }
        }
        if !provenance.elementary_ids.contains(&part.id) {
            provenance.elementary_ids.push(part.id);
        }
        for s in &part.sentences {
            if !provenance.sentence_ids.contains(s) {
                provenance.sentence_ids.push(s.clone());
            }
        }
    }

    let id = parts
        .iter()
        .map(|p| p.id.to_string())
        .collect::<Vec<_>>()
        .join("+");
    Ok(StrategyFrame {
        id: FrameId(id),
        behavior: Behavior {
            summary: summary.unwrap_or_default(),
            steps,
            causal_links: links,
        },
        functions,
        characteristics,
        environment: environment.map(|(_, e)| e),
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knowledge::NounPhrase;

    fn part(k: u32, functions: &[&str]) -> ElementaryStrategy {
        ElementaryStrategy {
            id: ElementaryId(k),
            sentences: vec![format!("s{k}")],
            fragment: FrameFragment {
                functions: functions
                    .iter()
                    .map(|f| FunctionExpr::action("driving", *f))
                    .collect(),
                ..FrameFragment::default()
            },
        }
    }

    #[test]
    fn disjoint_union() {
        let f = compose(&[part(1, &["a"]), part(2, &["b"])]).unwrap();
        let objects: Vec<_> = f.functions.iter().map(FunctionExpr::phrase).collect();
        assert_eq!(objects, ["driving a", "driving b"]);
        assert_eq!(f.provenance.elementary_ids, [ElementaryId(1), ElementaryId(2)]);
        assert_eq!(f.id.as_str(), "S_e^1+S_e^2");
    }

    #[test]
    fn duplicates_removed_case_insensitively() {
        let f = compose(&[part(1, &["Flexible  structure"]), part(2, &["flexible structure"])])
            .unwrap();
        assert_eq!(f.functions.len(), 1);
    }

    #[test]
    fn environment_conflict() {
        let mut a = part(1, &["a"]);
        a.fragment.environment = Some(NounPhrase::new("seafloor", Vec::<String>::new()));
        let mut b = part(2, &["b"]);
        b.fragment.environment = Some(NounPhrase::new("water", ["open"]));
        let err = compose(&[a.clone(), b]).unwrap_err();
        assert_eq!(err.code(), "CONFLICTING_ENVIRONMENT");

        let mut same = part(3, &["c"]);
        same.fragment.environment = Some(NounPhrase::new("Seafloor", Vec::<String>::new()));
        assert!(compose(&[a, same]).is_ok());
    }

    #[test]
    fn causal_links_reindexed() {
        let mut a = part(1, &["a"]);
        a.fragment.steps = vec![FunctionExpr::state("mantle", "contracting")];
        let mut b = part(2, &["b"]);
        b.fragment.steps = vec![FunctionExpr::state("cavity", "shrinking")];
        b.fragment.causal_links = vec![CausalRelation {
            cause: StepRange { start: 0, end: 1 },
            effect: FunctionExpr::action("ejecting", "water"),
            conjunction: "so that".into(),
        }];
        let f = compose(&[a, b]).unwrap();
        assert_eq!(f.behavior.steps.len(), 2);
        assert_eq!(f.behavior.causal_links[0].cause, StepRange { start: 1, end: 2 });
    }

    #[test]
    fn no_parts() {
        assert_eq!(compose(&[]), Err(ComposeError::NoParts));
    }
}
