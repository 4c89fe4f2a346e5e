use std::collections::{BTreeSet, HashMap};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{CorpusError, SentenceRecord};
use crate::knowledge::Dimension;
use crate::text::{is_stopword, words};
use crate::verbs::lexicon as verb_lexicon;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

static LEXICON_JSON: &str = include_str!("../../data/lexicon.json");

/// Per-dimension scores in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    #[serde(rename = "Function")]
    pub function: f64,
    #[serde(rename = "Behavior")]
    pub behavior: f64,
    #[serde(rename = "Characteristic")]
    pub characteristic: f64,
    #[serde(rename = "Environment")]
    pub environment: f64,
}

impl Scores {
    pub fn get(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Function => self.function,
            Dimension::Behavior => self.behavior,
            Dimension::Characteristic => self.characteristic,
            Dimension::Environment => self.environment,
        }
    }

    pub fn set(&mut self, d: Dimension, value: f64) {
        let slot = match d {
            Dimension::Function => &mut self.function,
            Dimension::Behavior => &mut self.behavior,
            Dimension::Characteristic => &mut self.characteristic,
            Dimension::Environment => &mut self.environment,
        };
        *slot = value.clamp(0.0, 1.0);
    }

    /// 1.0 for every listed dimension, 0.0 elsewhere.
    pub fn indicator(labels: &[Dimension]) -> Self {
        let mut s = Scores::default();
        for d in labels {
            s.set(*d, 1.0);
        }
        s
    }

    /// Dimensions scoring at or above `threshold`, in canonical order.
    pub fn labels(&self, threshold: f64) -> Vec<Dimension> {
        Dimension::ALL
            .into_iter()
            .filter(|d| self.get(*d) >= threshold)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelSource {
    Lexicon,
    #[serde(rename = "LLM")]
    Llm,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSentence {
    pub sentence: SentenceRecord,
    pub scores: Scores,
    pub labels: Vec<Dimension>,
    pub label_source: LabelSource,
    pub threshold: f64,
}

impl LabeledSentence {
    pub fn has(&self, d: Dimension) -> bool {
        self.labels.contains(&d)
    }
}

/// A sentence scorer. Implementations are shared across worker threads.
pub trait Classifier: Send + Sync {
    fn source(&self) -> LabelSource;
    fn scores(&self, sentence: &SentenceRecord) -> Result<Scores, CorpusError>;
}

pub fn classify(
    sentence: &SentenceRecord,
    classifier: &dyn Classifier,
    threshold: f64,
) -> Result<LabeledSentence, CorpusError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CorpusError::BadThreshold(threshold));
    }
    let scores = classifier.scores(sentence)?;
    Ok(LabeledSentence {
        sentence: sentence.clone(),
        labels: scores.labels(threshold),
        scores,
        label_source: classifier.source(),
        threshold,
    })
}

pub fn classify_all(
    sentences: &[SentenceRecord],
    classifier: &dyn Classifier,
    threshold: f64,
) -> Result<Vec<LabeledSentence>, CorpusError> {
    sentences
        .iter()
        .map(|s| classify(s, classifier, threshold))
        .collect()
}

#[derive(Deserialize)]
struct RawLexicon {
    function: RawFunction,
    behavior: RawTerms,
    characteristic: RawCharacteristic,
    environment: RawEnvironment,
}

#[derive(Deserialize)]
struct RawEnvironment {
    terms: HashMap<String, f64>,
    habitat_nouns: Vec<String>,
}

#[derive(Deserialize)]
struct RawTerms {
    terms: HashMap<String, f64>,
}

#[derive(Deserialize)]
struct RawFunction {
    terms: HashMap<String, f64>,
    purpose_infinitive: f64,
}

#[derive(Deserialize)]
struct RawCharacteristic {
    terms: HashMap<String, f64>,
    attributive_np: f64,
    predicate_adjective: f64,
    adjectives: Vec<String>,
    structure_nouns: Vec<String>,
}

const COPULAS: &[&str] = &["is", "are", "was", "were", "becomes", "remains"];

/// Furthest an attributive adjective may sit before its structure noun.
const NP_WINDOW: usize = 3;

/// Deterministic cue-word baseline. Each matched cue contributes its weight
/// and a dimension's score is the noisy-or `1 - Π(1 - w)` of its cues.
pub struct LexiconClassifier {
    terms: [Vec<(Vec<String>, f64)>; 4],
    purpose_infinitive: f64,
    attributive_np: f64,
    predicate_adjective: f64,
    adjectives: BTreeSet<String>,
    structure_nouns: BTreeSet<String>,
    habitat_nouns: BTreeSet<String>,
}

impl Default for LexiconClassifier {
    fn default() -> Self {
        LexiconClassifier::from_json(LEXICON_JSON).expect("bundled lexicon is valid")
    }
}

impl LexiconClassifier {
    pub fn from_json(doc: &str) -> Result<Self, serde_json::Error> {
        let raw: RawLexicon = serde_json::from_str(doc)?;
        let split = |terms: HashMap<String, f64>| {
            let mut v: Vec<(Vec<String>, f64)> =
                terms.into_iter().map(|(t, w)| (words(&t), w)).collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            v
        };
        Ok(LexiconClassifier {
            terms: [
                split(raw.function.terms),
                split(raw.behavior.terms),
                split(raw.characteristic.terms),
                split(raw.environment.terms),
            ],
            purpose_infinitive: raw.function.purpose_infinitive,
            attributive_np: raw.characteristic.attributive_np,
            predicate_adjective: raw.characteristic.predicate_adjective,
            adjectives: raw.characteristic.adjectives.into_iter().collect(),
            structure_nouns: raw.characteristic.structure_nouns.into_iter().collect(),
            habitat_nouns: raw.environment.habitat_nouns.into_iter().collect(),
        })
    }

    /// The bundled lexicon, loaded once.
    pub fn shared() -> &'static LexiconClassifier {
        static SHARED: OnceLock<LexiconClassifier> = OnceLock::new();
        SHARED.get_or_init(LexiconClassifier::default)
    }

    pub fn is_adjective(&self, word: &str) -> bool {
        self.adjectives.contains(word)
    }

    pub fn is_structure_noun(&self, word: &str) -> bool {
        self.structure_nouns.contains(word)
    }

    pub fn is_habitat_noun(&self, word: &str) -> bool {
        self.habitat_nouns.contains(word)
    }

    /// Cue weights that fired for `d`, for explaining a score.
    pub fn cues(&self, text: &str, d: Dimension) -> Vec<f64> {
        let w = words(text);
        let mut hits: Vec<f64> = self.terms[d.index()]
            .iter()
            .filter(|(t, _)| contains_seq(&w, t))
            .map(|(_, weight)| *weight)
            .collect();
        match d {
            Dimension::Function => {
                let verbs = verb_lexicon();
                let purpose = w
                    .windows(2)
                    .any(|p| p[0] == "to" && verbs.contains(&p[1]));
                if purpose {
                    hits.push(self.purpose_infinitive);
                }
            }
            Dimension::Characteristic => {
                let attributed = self.attributive_positions(&w);
                hits.extend(std::iter::repeat_n(self.attributive_np, attributed));
                let predicate = w
                    .windows(2)
                    .any(|p| COPULAS.contains(&p[0].as_str()) && self.adjectives.contains(&p[1]));
                if predicate {
                    hits.push(self.predicate_adjective);
                }
            }
            _ => {}
        }
        hits
    }

    /// Number of adjectives attached to a following structure noun.
    fn attributive_positions(&self, w: &[String]) -> usize {
        let mut positions = BTreeSet::new();
        for (j, noun) in w.iter().enumerate() {
            if !self.structure_nouns.contains(noun) {
                continue;
            }
            for i in j.saturating_sub(NP_WINDOW)..j {
                let gap_clean = w[i + 1..j].iter().all(|t| !is_stopword(t));
                if gap_clean && self.adjectives.contains(&w[i]) {
                    positions.insert(i);
                }
            }
        }
        positions.len()
    }
}

impl Classifier for LexiconClassifier {
    fn source(&self) -> LabelSource {
        LabelSource::Lexicon
    }

    fn scores(&self, sentence: &SentenceRecord) -> Result<Scores, CorpusError> {
        let mut s = Scores::default();
        for d in Dimension::ALL {
            let miss: f64 = self
                .cues(&sentence.text, d)
                .iter()
                .map(|w| 1.0 - w)
                .product();
            s.set(d, 1.0 - miss);
        }
        Ok(s)
    }
}

fn contains_seq(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Labels fixed per sentence id, e.g. human corrections. Unknown ids score zero.
#[derive(Debug, Clone, Default)]
pub struct FixedLabels {
    pub labels: HashMap<String, Vec<Dimension>>,
    pub source: Option<LabelSource>,
}

impl FixedLabels {
    pub fn human(labels: HashMap<String, Vec<Dimension>>) -> Self {
        FixedLabels {
            labels,
            source: Some(LabelSource::Human),
        }
    }
}

impl Classifier for FixedLabels {
    fn source(&self) -> LabelSource {
        self.source.unwrap_or(LabelSource::Human)
    }

    fn scores(&self, sentence: &SentenceRecord) -> Result<Scores, CorpusError> {
        Ok(self
            .labels
            .get(&sentence.id)
            .map(|l| Scores::indicator(l))
            .unwrap_or_default())
    }
}
