//! The F-B-Cs-in-E knowledge frame: one behavior, function and characteristic
//! lists, an optional environment, and where it all came from.

mod compose;
mod document;
mod validate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::text::{collapse_ws, POST_MODIFIER_LEADS};

pub use compose::{compose, ComposeError, ElementaryStrategy, FrameFragment};
pub use document::{
    parse_document, parse_frame, parse_frame_set, serialize_frame, serialize_frame_set, SchemaError,
    SchemaErrorKind, FBCE_VERSION,
};
pub use validate::{validate_frame, ValidationReport, Violation, ViolationCode};

/// The four knowledge dimensions every label belongs to.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum Dimension {
    Function,
    Behavior,
    Characteristic,
    Environment,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Function,
        Dimension::Behavior,
        Dimension::Characteristic,
        Dimension::Environment,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Function => "Function",
            Dimension::Behavior => "Behavior",
            Dimension::Characteristic => "Characteristic",
            Dimension::Environment => "Environment",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown dimension {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    Energy,
    Material,
    Signal,
}

/// One function phrase, identified by one of three patterns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum FunctionExpr {
    /// Verb (entity action) plus the noun phrase it acts on.
    #[serde(rename = "action")]
    Action { verb: String, object: String },
    /// Energy, material or signal flow turned from one object into another.
    #[serde(rename = "flow")]
    Flow {
        flow_kind: FlowKind,
        input_object: String,
        output_object: String,
    },
    /// An object changing state.
    #[serde(rename = "state")]
    State { object: String, change_verb: String },
}

impl FunctionExpr {
    pub fn action(verb: impl Into<String>, object: impl Into<String>) -> Self {
        FunctionExpr::Action {
            verb: verb.into(),
            object: object.into(),
        }
    }

    pub fn state(object: impl Into<String>, change_verb: impl Into<String>) -> Self {
        FunctionExpr::State {
            object: object.into(),
            change_verb: change_verb.into(),
        }
    }

    pub fn flow(kind: FlowKind, input: impl Into<String>, output: impl Into<String>) -> Self {
        FunctionExpr::Flow {
            flow_kind: kind,
            input_object: input.into(),
            output_object: output.into(),
        }
    }

    /// The verb slot, if the variant carries one.
    pub fn verb(&self) -> Option<&str> {
        match self {
            FunctionExpr::Action { verb, .. } => Some(verb),
            FunctionExpr::State { change_verb, .. } => Some(change_verb),
            FunctionExpr::Flow { .. } => None,
        }
    }

    /// Surface phrase, e.g. "generating directional flow".
    pub fn phrase(&self) -> String {
        match self {
            FunctionExpr::Action { verb, object } => collapse_ws(&format!("{verb} {object}")),
            FunctionExpr::State {
                object,
                change_verb,
            } => collapse_ws(&format!("{change_verb} {object}")),
            FunctionExpr::Flow {
                input_object,
                output_object,
                ..
            } => collapse_ws(&format!("converting {input_object} into {output_object}")),
        }
    }

    /// Noun-phrase fields as (field name, value) pairs.
    pub fn noun_fields(&self) -> Vec<(&'static str, &str)> {
        match self {
            FunctionExpr::Action { object, .. } | FunctionExpr::State { object, .. } => {
                vec![("object", object)]
            }
            FunctionExpr::Flow {
                input_object,
                output_object,
                ..
            } => vec![("input_object", input_object), ("output_object", output_object)],
        }
    }

    pub(crate) fn noun_field_mut(&mut self, field: &str) -> Option<&mut String> {
        match (self, field) {
            (FunctionExpr::Action { object, .. }, "object")
            | (FunctionExpr::State { object, .. }, "object") => Some(object),
            (FunctionExpr::Flow { input_object, .. }, "input_object") => Some(input_object),
            (FunctionExpr::Flow { output_object, .. }, "output_object") => Some(output_object),
            _ => None,
        }
    }
}

/// Half-open range of behavior step indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRange {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CausalRelation {
    pub cause: StepRange,
    pub effect: FunctionExpr,
    pub conjunction: String,
}

/// The single behavior slot: a summary phrase plus the ordered temporal process.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Behavior {
    pub summary: String,
    #[serde(default)]
    pub steps: Vec<FunctionExpr>,
    #[serde(default)]
    pub causal_links: Vec<CausalRelation>,
}

impl Behavior {
    pub fn summary(summary: impl Into<String>) -> Self {
        Behavior {
            summary: summary.into(),
            ..Behavior::default()
        }
    }
}

/// A noun phrase with attributives. Attributives opening with a post-modifier
/// word ("based on rigid support") render after the head, all others before it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NounPhrase {
    pub head: String,
    #[serde(default)]
    pub attributives: Vec<String>,
}

pub type Characteristic = NounPhrase;
pub type EnvironmentDesc = NounPhrase;

impl NounPhrase {
    pub fn new<I, S>(head: impl Into<String>, attributives: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        NounPhrase {
            head: head.into(),
            attributives: attributives.into_iter().map(Into::into).collect(),
        }
    }

    fn is_post(attr: &str) -> bool {
        attr.split_whitespace()
            .next()
            .is_some_and(|w| POST_MODIFIER_LEADS.contains(&w.to_lowercase().as_str()))
    }

    pub fn phrase(&self) -> String {
        let pre: Vec<&str> = self
            .attributives
            .iter()
            .filter(|a| !Self::is_post(a))
            .map(String::as_str)
            .collect();
        let post: Vec<&str> = self
            .attributives
            .iter()
            .filter(|a| Self::is_post(a))
            .map(String::as_str)
            .collect();
        let mut parts = pre;
        parts.push(&self.head);
        parts.extend(post);
        collapse_ws(&parts.join(" "))
    }

    /// Re-derives head and attributives from a rendered phrase, keeping the
    /// post-modifiers of `self` whose text still appears verbatim at the end.
    pub fn resplit(&self, phrase: &str) -> NounPhrase {
        let phrase = collapse_ws(phrase);
        let mut post: Vec<String> = Vec::new();
        let mut core = phrase.as_str();
        for attr in self.attributives.iter().filter(|a| Self::is_post(a)).rev() {
            let suffix = format!(" {}", collapse_ws(attr));
            if let Some(rest) = core.strip_suffix(suffix.as_str()) {
                post.insert(0, collapse_ws(attr));
                core = rest;
            }
        }
        let words: Vec<&str> = core.split_whitespace().collect();
        let (head, pre) = match words.split_last() {
            Some((h, rest)) => (h.to_string(), rest.join(" ")),
            None => (String::new(), String::new()),
        };
        let mut attributives = Vec::new();
        if !pre.is_empty() {
            attributives.push(pre);
        }
        attributives.extend(post);
        NounPhrase { head, attributives }
    }
}

/// Opaque frame identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrameId(pub String);

impl FrameId {
    pub fn new(s: impl Into<String>) -> Self {
        FrameId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FrameId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Elementary strategy label `S_e^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementaryId(pub u32);

impl fmt::Display for ElementaryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S_e^{}", self.0)
    }
}

impl FromStr for ElementaryId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s
            .strip_prefix("S_e^")
            .ok_or_else(|| format!("elementary id {s:?} is not of the form S_e^k"))?;
        match k.parse::<u32>() {
            Ok(k) if k > 0 => Ok(ElementaryId(k)),
            _ => Err(format!("elementary id {s:?} needs a positive integer k")),
        }
    }
}

impl Serialize for ElementaryId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ElementaryId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default)]
    pub source_doc: String,
    #[serde(default)]
    pub sentence_ids: Vec<String>,
    #[serde(default)]
    pub elementary_ids: Vec<ElementaryId>,
    #[serde(default)]
    pub notes: String,
}

/// One "F-B-Cs in E" record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategyFrame {
    pub id: FrameId,
    pub behavior: Behavior,
    pub functions: Vec<FunctionExpr>,
    pub characteristics: Vec<Characteristic>,
    #[serde(default)]
    pub environment: Option<EnvironmentDesc>,
    pub provenance: Provenance,
}

/// A phrase-bearing slot of a frame addressed by a JSON-pointer-like path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextUnit {
    pub path: String,
    pub text: String,
}

impl StrategyFrame {
    /// Every noun-bearing phrase of the frame. Verb slots are excluded;
    /// characteristics and the environment are addressed as whole phrases.
    pub fn text_units(&self) -> Vec<TextUnit> {
        let mut units = vec![TextUnit {
            path: "/behavior/summary".into(),
            text: self.behavior.summary.clone(),
        }];
        for (i, step) in self.behavior.steps.iter().enumerate() {
            for (field, value) in step.noun_fields() {
                units.push(TextUnit {
                    path: format!("/behavior/steps/{i}/{field}"),
                    text: value.to_string(),
                });
            }
        }
        for (i, link) in self.behavior.causal_links.iter().enumerate() {
            for (field, value) in link.effect.noun_fields() {
                units.push(TextUnit {
                    path: format!("/behavior/causal_links/{i}/effect/{field}"),
                    text: value.to_string(),
                });
            }
        }
        for (i, f) in self.functions.iter().enumerate() {
            for (field, value) in f.noun_fields() {
                units.push(TextUnit {
                    path: format!("/functions/{i}/{field}"),
                    text: value.to_string(),
                });
            }
        }
        for (i, c) in self.characteristics.iter().enumerate() {
            units.push(TextUnit {
                path: format!("/characteristics/{i}"),
                text: c.phrase(),
            });
        }
        if let Some(env) = &self.environment {
            units.push(TextUnit {
                path: "/environment".into(),
                text: env.phrase(),
            });
        }
        units
    }

    pub fn text_unit(&self, path: &str) -> Option<String> {
        self.text_units()
            .into_iter()
            .find(|u| u.path == path)
            .map(|u| u.text)
    }

    /// Replaces the text of the unit at `path`. Returns false for unknown paths.
    pub fn set_text_unit(&mut self, path: &str, text: &str) -> bool {
        let segs: Vec<&str> = path.trim_start_matches('/').split('/').collect();
        let idx = |s: &str| s.parse::<usize>().ok();
        match segs.as_slice() {
            ["behavior", "summary"] => {
                self.behavior.summary = text.to_string();
                true
            }
            ["behavior", "steps", i, field] => idx(i)
                .and_then(|i| self.behavior.steps.get_mut(i))
                .and_then(|s| s.noun_field_mut(field))
                .map(|slot| *slot = text.to_string())
                .is_some(),
            ["behavior", "causal_links", i, "effect", field] => idx(i)
                .and_then(|i| self.behavior.causal_links.get_mut(i))
                .and_then(|l| l.effect.noun_field_mut(field))
                .map(|slot| *slot = text.to_string())
                .is_some(),
            ["functions", i, field] => idx(i)
                .and_then(|i| self.functions.get_mut(i))
                .and_then(|f| f.noun_field_mut(field))
                .map(|slot| *slot = text.to_string())
                .is_some(),
            ["characteristics", i] => match idx(i).and_then(|i| self.characteristics.get_mut(i)) {
                Some(c) => {
                    if c.phrase() != collapse_ws(text) {
                        *c = c.resplit(text);
                    }
                    true
                }
                None => false,
            },
            ["environment"] => match self.environment.as_mut() {
                Some(e) => {
                    if e.phrase() != collapse_ws(text) {
                        *e = e.resplit(text);
                    }
                    true
                }
                None => false,
            },
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignLevel {
    System,
    Subsystem,
    Component,
}

/// An engineering problem at one design level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignProblem {
    pub level: DesignLevel,
    pub requirement_elements: Vec<String>,
    #[serde(default)]
    pub processing_elements: Vec<String>,
    #[serde(default)]
    pub description: String,
}

impl DesignProblem {
    pub fn validate(&self) -> Result<(), String> {
        if self
            .requirement_elements
            .iter()
            .all(|r| r.trim().is_empty())
        {
            return Err("requirement_elements must contain at least one non-empty element".into());
        }
        Ok(())
    }
}
