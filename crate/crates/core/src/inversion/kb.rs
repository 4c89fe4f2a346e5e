use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::InversionError;
use crate::text::phrase_key;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermMapping {
    pub bio_term: String,
    pub eng_term: String,
    #[serde(default)]
    pub domain_tags: Vec<String>,
    #[serde(default)]
    pub bidirectional: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleVerdict {
    Allowed,
    Disallowed,
}

/// Whether two engineering terms may appear in the same frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompatibilityRule {
    pub terms: [String; 2],
    pub verdict: RuleVerdict,
    #[serde(default)]
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suggestion: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineeringKB {
    #[serde(default = "one")]
    pub fbce_version: u32,
    #[serde(default)]
    pub mappings: Vec<TermMapping>,
    #[serde(default)]
    pub vocabulary: Vec<String>,
    #[serde(default)]
    pub rules: Vec<CompatibilityRule>,
}

fn one() -> u32 {
    1
}

impl EngineeringKB {
    pub fn from_json(doc: &str) -> Result<Self, InversionError> {
        let de = &mut serde_json::Deserializer::from_str(doc);
        let kb: EngineeringKB = serde_path_to_error::deserialize(de).map_err(|e| {
            InversionError::KbInvalid(format!("at /{}: {}", e.path(), e.inner()))
        })?;
        kb.check()?;
        Ok(kb)
    }

    pub fn is_empty(&self) -> bool {
        self.mappings.is_empty()
    }

    pub fn in_vocabulary(&self, term: &str) -> bool {
        let key = phrase_key(term);
        self.vocabulary.iter().any(|v| phrase_key(v) == key)
    }

    /// Structural invariants: distinct bio/eng terms, unique bio terms, and
    /// engineering terms and rules drawn from the vocabulary.
    pub fn check(&self) -> Result<(), InversionError> {
        if self.fbce_version != 1 {
            return Err(InversionError::KbInvalid(format!(
                "unsupported fbce_version {}",
                self.fbce_version
            )));
        }
        let mut seen = HashSet::new();
        for (i, m) in self.mappings.iter().enumerate() {
            if m.bio_term.trim().is_empty() || m.eng_term.trim().is_empty() {
                return Err(InversionError::KbInvalid(format!("mapping {i} has an empty term")));
            }
            if phrase_key(&m.bio_term) == phrase_key(&m.eng_term) {
                return Err(InversionError::KbInvalid(format!(
                    "mapping {i} maps {:?} onto itself",
                    m.bio_term
                )));
            }
            if !self.vocabulary.is_empty() && !self.in_vocabulary(&m.eng_term) {
                return Err(InversionError::KbInvalid(format!(
                    "engineering term {:?} is not in the vocabulary",
                    m.eng_term
                )));
            }
            if !seen.insert(phrase_key(&m.bio_term)) {
                return Err(InversionError::KbInvalid(format!(
                    "bio term {:?} is mapped twice",
                    m.bio_term
                )));
            }
        }
        for (i, r) in self.rules.iter().enumerate() {
            let referenced = r.terms.iter().chain(r.suggestion.iter());
            for t in referenced {
                if !self.in_vocabulary(t) {
                    return Err(InversionError::KbInvalid(format!(
                        "rule {i} references {t:?}, which is not in the vocabulary"
                    )));
                }
            }
        }
        Ok(())
    }
}
