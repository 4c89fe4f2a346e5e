use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::inversion::InversionResult;
use crate::knowledge::{DesignProblem, EnvironmentDesc};
use crate::text::{content_stems, is_stopword, jaccard, stem, words};
use crate::verbs::lexicon;

/// The four computed indicators, each in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AutoScores {
    pub functional_compliance: f64,
    pub behavioral_alignment: f64,
    pub characteristic_consistency: f64,
    pub environmental_migration: f64,
}

impl AutoScores {
    pub fn get(&self, id: &str) -> Option<f64> {
        match id {
            super::FUNCTIONAL_COMPLIANCE => Some(self.functional_compliance),
            super::BEHAVIORAL_ALIGNMENT => Some(self.behavioral_alignment),
            super::CHARACTERISTIC_CONSISTENCY => Some(self.characteristic_consistency),
            super::ENVIRONMENTAL_MIGRATION => Some(self.environmental_migration),
            _ => None,
        }
    }
}

/// Scores an engineering frame against a design problem.
///
/// - functional compliance: mean over requirement elements of the best
///   stemmed-token Jaccard against any function phrase
/// - behavioral alignment: share of requirement lead verbs found in the
///   behavior summary and steps (1.0 when no requirement starts with a verb)
/// - characteristic consistency: share of characteristics whose head is resolved
/// - environmental migration: token Jaccard between the frame environment
///   and `target_env`; 1.0 when either is absent
pub fn score_auto_criteria(
    result: &InversionResult,
    problem: &DesignProblem,
    target_env: Option<&EnvironmentDesc>,
) -> AutoScores {
    let frame = &result.engineering_frame;
    let requirements: Vec<&String> = problem
        .requirement_elements
        .iter()
        .filter(|r| !r.trim().is_empty())
        .collect();

    let functions: Vec<BTreeSet<String>> = frame
        .functions
        .iter()
        .map(|f| content_stems(&f.phrase()))
        .collect();
    let functional_compliance = mean(requirements.iter().map(|req| {
        let want = content_stems(req);
        functions
            .iter()
            .map(|have| jaccard(&want, have))
            .fold(0.0, f64::max)
    }));

    let mut behavior_text = vec![frame.behavior.summary.clone()];
    behavior_text.extend(frame.behavior.steps.iter().map(|s| s.phrase()));
    let behavior_verbs: BTreeSet<String> = behavior_text
        .iter()
        .flat_map(|t| words(t))
        .map(|w| verb_key(&w))
        .collect();
    let wanted: Vec<String> = requirements.iter().filter_map(|r| lead_verb(r)).collect();
    let behavioral_alignment = if wanted.is_empty() {
        1.0
    } else {
        wanted.iter().filter(|v| behavior_verbs.contains(*v)).count() as f64 / wanted.len() as f64
    };

    let characteristic_consistency = if frame.characteristics.is_empty() {
        1.0
    } else {
        let clean = (0..frame.characteristics.len())
            .filter(|i| {
                let path = format!("/characteristics/{i}");
                !result.unresolved.iter().any(|u| u.path == path)
            })
            .count();
        clean as f64 / frame.characteristics.len() as f64
    };

    let environmental_migration = match (&frame.environment, target_env) {
        (Some(env), Some(target)) => {
            jaccard(&content_stems(&env.phrase()), &content_stems(&target.phrase()))
        }
        _ => 1.0,
    };

    AutoScores {
        functional_compliance,
        behavioral_alignment,
        characteristic_consistency,
        environmental_migration,
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// First content word of a requirement, when it is a lexicon verb.
fn lead_verb(requirement: &str) -> Option<String> {
    let first = words(requirement).into_iter().find(|w| !is_stopword(w))?;
    lexicon().lemma(&first)
}

fn verb_key(word: &str) -> String {
    lexicon().lemma(word).unwrap_or_else(|| stem(word))
}
