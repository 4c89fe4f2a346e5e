//! Closed verb lexicon: lemma lookup, function-variant classes and gerund formation.

use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use serde::Deserialize;
use thiserror::Error;

static LEXICON_JSON: &str = include_str!("../data/verbs.json");

const IRREGULAR_PAST: &[(&str, &str)] = &[
    ("ran", "run"),
    ("swam", "swim"),
    ("made", "make"),
    ("took", "take"),
    ("drove", "drive"),
    ("bent", "bend"),
    ("held", "hold"),
    ("shrank", "shrink"),
    ("shrunk", "shrink"),
    ("brought", "bring"),
    ("bound", "bind"),
    ("sprang", "spring"),
    ("has", "have"),
    ("is", "be"),
    ("are", "be"),
    ("was", "be"),
    ("were", "be"),
];

/// Which [`crate::knowledge::FunctionExpr`] variant a verb triggers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerbClass {
    Transform,
    StateChange,
    Action,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GerundError {
    #[error("NOT_A_VERB: leading token {0:?} is not a known verb")]
    NotAVerb(String),
}

impl GerundError {
    pub fn code(&self) -> &'static str {
        "NOT_A_VERB"
    }
}

#[derive(Deserialize)]
struct RawLexicon {
    verbs: Vec<String>,
    transform_verbs: Vec<String>,
    state_verbs: Vec<String>,
    doubling: Vec<String>,
    irregular_gerunds: HashMap<String, String>,
    phrasal: Vec<String>,
}

pub struct VerbLexicon {
    verbs: HashSet<String>,
    transform: HashSet<String>,
    state: HashSet<String>,
    doubling: HashSet<String>,
    irregular: HashMap<String, String>,
    phrasal: Vec<Vec<String>>,
}

pub fn lexicon() -> &'static VerbLexicon {
    static LEX: OnceLock<VerbLexicon> = OnceLock::new();
    LEX.get_or_init(|| {
        let raw: RawLexicon =
            serde_json::from_str(LEXICON_JSON).expect("bundled verb lexicon is valid JSON");
        let mut verbs: HashSet<String> = raw.verbs.into_iter().collect();
        verbs.extend(raw.transform_verbs.iter().cloned());
        verbs.extend(raw.state_verbs.iter().cloned());
        VerbLexicon {
            verbs,
            transform: raw.transform_verbs.into_iter().collect(),
            state: raw.state_verbs.into_iter().collect(),
            doubling: raw.doubling.into_iter().collect(),
            irregular: raw.irregular_gerunds,
            phrasal: raw
                .phrasal
                .iter()
                .map(|p| p.split_whitespace().map(str::to_string).collect())
                .collect(),
        }
    })
}

/// Surface check used by frame validation: the token ends in "-ing".
pub fn is_gerund_token(token: &str) -> bool {
    let t = token.to_lowercase();
    t.len() > 3 && t.ends_with("ing")
}

impl VerbLexicon {
    pub fn contains(&self, base: &str) -> bool {
        self.verbs.contains(base)
    }

    pub fn class(&self, base: &str) -> VerbClass {
        if self.transform.contains(base) {
            VerbClass::Transform
        } else if self.state.contains(base) {
            VerbClass::StateChange
        } else {
            VerbClass::Action
        }
    }

    /// Phrasal particle following `base` ("act" -> "as"), if the lexicon lists one.
    pub fn particle(&self, base: &str, next: Option<&str>) -> Option<String> {
        let next = next?;
        self.phrasal
            .iter()
            .find(|p| p.len() == 2 && p[0] == base && p[1] == next)
            .map(|p| p[1].clone())
    }

    /// Base form of `token` when it is an inflection of a lexicon verb.
    pub fn lemma(&self, token: &str) -> Option<String> {
        let t = token.to_lowercase();
        if self.verbs.contains(&t) {
            return Some(t);
        }
        if let Some((_, base)) = IRREGULAR_PAST.iter().find(|(form, _)| *form == t) {
            return self.verbs.contains(*base).then(|| base.to_string());
        }
        let mut candidates: Vec<String> = Vec::new();
        if let Some(s) = t.strip_suffix("ies") {
            candidates.push(format!("{s}y"));
        }
        if let Some(s) = t.strip_suffix("es") {
            candidates.push(s.to_string());
        }
        if let Some(s) = t.strip_suffix('s') {
            candidates.push(s.to_string());
        }
        if let Some(s) = t.strip_suffix("ied") {
            candidates.push(format!("{s}y"));
        }
        if let Some(s) = t.strip_suffix("ed") {
            candidates.push(s.to_string());
            candidates.push(undouble(s));
        }
        if let Some(s) = t.strip_suffix('d') {
            candidates.push(s.to_string());
        }
        if let Some(s) = t.strip_suffix("ying") {
            candidates.push(format!("{s}ie"));
        }
        if let Some(s) = t.strip_suffix("ing") {
            candidates.push(s.to_string());
            candidates.push(format!("{s}e"));
            candidates.push(undouble(s));
        }
        candidates.into_iter().find(|c| self.verbs.contains(c))
    }

    /// Present participle of a base form.
    pub fn gerund(&self, base: &str) -> String {
        if let Some(g) = self.irregular.get(base) {
            return g.clone();
        }
        if self.doubling.contains(base) {
            let last = base.chars().last().unwrap_or_default();
            return format!("{base}{last}ing");
        }
        if let Some(stem) = base.strip_suffix("ie") {
            return format!("{stem}ying");
        }
        if base.ends_with("ee") || base.ends_with("ye") || base.ends_with("oe") {
            return format!("{base}ing");
        }
        if let Some(stem) = base.strip_suffix('e') {
            if !stem.is_empty() {
                return format!("{stem}ing");
            }
        }
        format!("{base}ing")
    }
}

fn undouble(s: &str) -> String {
    let b = s.as_bytes();
    if b.len() >= 2 && b[b.len() - 1] == b[b.len() - 2] {
        s[..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}

/// Converts the leading verb of `phrase` to its "-ing" form, leaving the rest untouched.
///
/// A leading token that already ends in "-ing" is treated as a gerund, so the
/// operation is idempotent.
pub fn gerundize(phrase: &str) -> Result<String, GerundError> {
    let trimmed = phrase.trim_start();
    let split = trimmed
        .find(char::is_whitespace)
        .unwrap_or(trimmed.len());
    let (head, rest) = trimmed.split_at(split);
    if head.is_empty() {
        return Err(GerundError::NotAVerb(String::new()));
    }
    if is_gerund_token(head) {
        return Ok(trimmed.to_string());
    }
    let lex = lexicon();
    let base = lex
        .lemma(head)
        .ok_or_else(|| GerundError::NotAVerb(head.to_string()))?;
    let gerund = crate::text::match_capital(&lex.gerund(&base), head);
    Ok(format!("{gerund}{rest}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(
            gerundize("generate directional flow").unwrap(),
            "generating directional flow"
        );
        assert_eq!(
            gerundize("driving flexible structure").unwrap(),
            "driving flexible structure"
        );
        assert_eq!(
            gerundize("flexible structure"),
            Err(GerundError::NotAVerb("flexible".into()))
        );
    }

    #[test]
    fn keeps_capital_and_inflection() {
        assert_eq!(gerundize("Shrink driver").unwrap(), "Shrinking driver");
        assert_eq!(gerundize("stores elastic energy").unwrap(), "storing elastic energy");
    }

    #[test]
    fn lemmas() {
        let lex = lexicon();
        assert_eq!(lex.lemma("generates").as_deref(), Some("generate"));
        assert_eq!(lex.lemma("pushes").as_deref(), Some("push"));
        assert_eq!(lex.lemma("stopped").as_deref(), Some("stop"));
        assert_eq!(lex.lemma("expelled").as_deref(), Some("expel"));
        assert_eq!(lex.lemma("muscle"), None);
        assert_eq!(lex.class("shrink"), VerbClass::StateChange);
        assert_eq!(lex.class("convert"), VerbClass::Transform);
        assert_eq!(lex.class("steer"), VerbClass::Action);
    }
}
