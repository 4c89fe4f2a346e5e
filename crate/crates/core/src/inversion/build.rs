use std::collections::HashSet;
use std::sync::Arc;

use super::InversionError;
use crate::corpus::{LabeledSentence, LexiconClassifier};
use crate::knowledge::{
    Behavior, CausalRelation, Characteristic, Dimension, EnvironmentDesc, FlowKind, FrameId,
    FunctionExpr, NounPhrase, Provenance, StepRange, StrategyFrame,
};
use crate::llm::{LlmClient, LlmTask, Parsed};
use crate::text::{is_determiner, is_preposition, is_stopword, phrase_key, word_spans};
use crate::verbs::{lexicon as verbs, VerbClass};

/// Produces the behavior summary phrase of a frame.
pub trait Summarizer {
    fn summarize(
        &self,
        sentences: &[&LabeledSentence],
        steps: &[FunctionExpr],
        functions: &[FunctionExpr],
    ) -> Result<String, InversionError>;
}

/// The first behavior step, else the first function, as a capitalized phrase.
pub struct RuleSummarizer;

impl Summarizer for RuleSummarizer {
    fn summarize(
        &self,
        _: &[&LabeledSentence],
        steps: &[FunctionExpr],
        functions: &[FunctionExpr],
    ) -> Result<String, InversionError> {
        let phrase = steps
            .first()
            .or(functions.first())
            .map(FunctionExpr::phrase)
            .unwrap_or_default();
        Ok(crate::text::match_capital(&phrase, "A"))
    }
}

pub struct LlmSummarizer(pub Arc<LlmClient>);

impl Summarizer for LlmSummarizer {
    fn summarize(
        &self,
        sentences: &[&LabeledSentence],
        _: &[FunctionExpr],
        _: &[FunctionExpr],
    ) -> Result<String, InversionError> {
        let texts: Vec<String> = sentences.iter().map(|s| s.sentence.text.clone()).collect();
        match self.0.complete(&LlmTask::summarize(&texts))?.parsed {
            Parsed::Text(t) => Ok(t),
            other => Err(InversionError::Llm(crate::llm::LlmError::SchemaRejected {
                attempts: 1,
                reason: format!("unexpected reply {other:?}"),
            })),
        }
    }
}

#[derive(Debug, Clone)]
struct Tok {
    w: String,
    brk: bool,
}

fn tokens(text: &str) -> Vec<Tok> {
    let mut prev = 0;
    word_spans(text)
        .into_iter()
        .map(|(a, b)| {
            let brk = text[prev..a].contains([',', ';', ':', '.', '!', '?', '(', ')']);
            prev = b;
            Tok {
                w: text[a..b].to_lowercase(),
                brk,
            }
        })
        .collect()
}

const AUXILIARIES: &[&str] = &[
    "is", "are", "was", "were", "be", "been", "being", "can", "could", "may", "might", "will",
    "would", "does", "do", "did", "has", "have", "had", "also", "then", "first", "slowly",
    "rapidly", "quickly",
];
const CLAUSE_ENDERS: &[&str] = &[
    "and", "so", "which", "while", "when", "because", "then", "thus", "causing", "therefore",
    "but", "whereas",
];
const CAUSE_FIRST: &[&str] = &["so that", "therefore", "thus", "causing", "which causes"];
const EFFECT_FIRST: &[&str] = &["when", "because", "once"];
const ENERGY_WORDS: &[&str] = &[
    "energy", "heat", "thermal", "kinetic", "potential", "elastic", "force", "pressure", "power",
    "strain", "work", "electrical", "hydraulic",
];
const SIGNAL_WORDS: &[&str] = &["signal", "signals", "information", "stimulus", "stimuli", "cue"];

fn join(toks: &[Tok]) -> String {
    toks.iter()
        .filter(|t| !is_determiner(&t.w))
        .map(|t| t.w.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Index of the main verb: the first lexicon verb that is not used as a noun
/// after a determiner and is not an auxiliary.
fn main_verb(toks: &[Tok]) -> Option<(usize, String)> {
    let lex = verbs();
    toks.iter().enumerate().find_map(|(i, t)| {
        if AUXILIARIES.contains(&t.w.as_str()) || is_stopword(&t.w) {
            return None;
        }
        if i > 0 && is_determiner(&toks[i - 1].w) {
            return None;
        }
        let lemma = lex.lemma(&t.w)?;
        (lemma != "be" && lemma != "have").then_some((i, lemma))
    })
}

/// Noun phrase before the verb, back to the start of its clause.
fn subject(toks: &[Tok], verb: usize) -> String {
    let mut start = 0;
    for i in (0..verb).rev() {
        if CLAUSE_ENDERS.contains(&toks[i].w.as_str()) || EFFECT_FIRST.contains(&toks[i].w.as_str()) {
            start = i + 1;
            break;
        }
        if toks[i].brk {
            start = i;
            break;
        }
    }
    let part: Vec<Tok> = toks[start..verb]
        .iter()
        .filter(|t| !AUXILIARIES.contains(&t.w.as_str()))
        .cloned()
        .collect();
    join(&part)
}

/// Tokens after `from` up to the end of the clause.
fn rest_of_clause(toks: &[Tok], from: usize) -> &[Tok] {
    let mut end = from;
    while end < toks.len() {
        let t = &toks[end];
        if end > from && t.brk {
            break;
        }
        if CLAUSE_ENDERS.contains(&t.w.as_str()) {
            break;
        }
        if t.w == "to" && toks.get(end + 1).is_some_and(|n| verbs().contains(&n.w)) {
            break;
        }
        end += 1;
    }
    &toks[from..end]
}

fn flow_kind(words: &str) -> FlowKind {
    let ws: Vec<&str> = words.split_whitespace().collect();
    if ws.iter().any(|w| ENERGY_WORDS.contains(w)) {
        FlowKind::Energy
    } else if ws.iter().any(|w| SIGNAL_WORDS.contains(w)) {
        FlowKind::Signal
    } else {
        FlowKind::Material
    }
}

fn extract_function(toks: &[Tok]) -> Option<FunctionExpr> {
    let lex = verbs();
    let (v, lemma) = main_verb(toks)?;
    let passive = v > 0
        && ["is", "are", "was", "were", "be", "been"].contains(&toks[v - 1].w.as_str())
        && toks[v].w != lemma;
    let mut after = v + 1;
    let mut gerund = lex.gerund(&lemma);
    if let Some(p) = lex.particle(&lemma, toks.get(v + 1).map(|t| t.w.as_str())) {
        gerund = format!("{gerund} {p}");
        after += 1;
    }
    let object_toks = rest_of_clause(toks, after.min(toks.len()));
    let object = join(object_toks);
    let subj = subject(toks, v);

    match lex.class(&lemma) {
        VerbClass::Transform => {
            let cut = object_toks.iter().position(|t| t.w == "into" || t.w == "to");
            if let Some(cut) = cut {
                let input = join(&object_toks[..cut]);
                let output = join(&object_toks[cut + 1..]);
                if !input.is_empty() && !output.is_empty() {
                    let kind = flow_kind(&format!("{input} {output}"));
                    return Some(FunctionExpr::flow(kind, input, output));
                }
            }
        }
        VerbClass::StateChange => {
            let object = if subj.is_empty() { object } else { subj.clone() };
            return (!object.is_empty()).then(|| FunctionExpr::state(object, gerund));
        }
        VerbClass::Action => {}
    }
    if passive && !subj.is_empty() {
        return Some(FunctionExpr::action(gerund, subj));
    }
    if object.is_empty() {
        let next = after.min(toks.len());
        if toks.get(next).is_some_and(|t| t.w == "to") {
            return extract_function(&toks[next + 1..]);
        }
        return None;
    }
    Some(FunctionExpr::action(gerund, object))
}

fn find_phrase(toks: &[Tok], phrase: &str) -> Option<usize> {
    let p: Vec<&str> = phrase.split(' ').collect();
    (0..toks.len()).find(|&i| {
        i + p.len() <= toks.len() && toks[i..i + p.len()].iter().zip(&p).all(|(t, w)| t.w == *w)
    })
}

/// Steps and causal links of one behavior sentence.
fn behavior_of(toks: &[Tok], offset: usize) -> (Vec<FunctionExpr>, Vec<CausalRelation>) {
    let conj_len = |c: &str| c.split(' ').count();
    if let Some(first) = toks.first() {
        if EFFECT_FIRST.contains(&first.w.as_str()) {
            let brk = toks.iter().skip(1).position(|t| t.brk).map(|p| p + 1);
            if let Some(brk) = brk {
                if let Some(step) = extract_function(&toks[1..brk]) {
                    let effect = extract_function(&toks[brk..]);
                    let links = effect
                        .map(|effect| CausalRelation {
                            cause: StepRange { start: offset, end: offset + 1 },
                            effect,
                            conjunction: first.w.clone(),
                        })
                        .into_iter()
                        .collect();
                    return (vec![step], links);
                }
            }
        }
    }
    for conj in CAUSE_FIRST.iter().chain(EFFECT_FIRST) {
        let Some(at) = find_phrase(toks, conj).filter(|&i| i > 0) else {
            continue;
        };
        let (before, after) = (&toks[..at], &toks[at + conj_len(conj)..]);
        let (cause, effect) = if EFFECT_FIRST.contains(conj) {
            (after, before)
        } else {
            (before, after)
        };
        if let (Some(step), Some(effect)) = (extract_function(cause), extract_function(effect)) {
            let link = CausalRelation {
                cause: StepRange { start: offset, end: offset + 1 },
                effect,
                conjunction: conj.to_string(),
            };
            return (vec![step], vec![link]);
        }
    }
    let mut steps = Vec::new();
    for part in toks.split(|t| t.w == "then") {
        if let Some(step) = extract_function(part) {
            steps.push(step);
        }
    }
    (steps, Vec::new())
}

fn characteristics_of(toks: &[Tok], lexicon: &LexiconClassifier) -> Vec<Characteristic> {
    let lex = verbs();
    let mut out = Vec::new();
    for (j, t) in toks.iter().enumerate() {
        if !lexicon.is_structure_noun(&t.w) {
            continue;
        }
        if toks.get(j + 1).is_some_and(|n| !n.brk && lexicon.is_structure_noun(&n.w)) {
            continue;
        }
        let mut attrs = Vec::new();
        let mut i = j;
        while i > 0 && j - i < 3 && !toks[i].brk {
            let m = &toks[i - 1].w;
            if is_stopword(m) || is_determiner(m) || lex.lemma(m).is_some() {
                break;
            }
            attrs.insert(0, m.clone());
            i -= 1;
        }
        if !attrs.is_empty() {
            out.push(NounPhrase::new(t.w.clone(), attrs));
        }
    }
    for (c, window) in toks.windows(2).enumerate() {
        let copula = ["is", "are", "was", "were", "becomes", "remains"].contains(&window[0].w.as_str());
        if copula && lexicon.is_adjective(&window[1].w) && c > 0 && !is_stopword(&toks[c - 1].w) {
            out.push(NounPhrase::new(toks[c - 1].w.clone(), [window[1].w.clone()]));
        }
    }
    if out.is_empty() {
        let bare = toks.iter().find(|t| lexicon.is_structure_noun(&t.w));
        if let Some(t) = bare {
            out.push(NounPhrase::new(t.w.clone(), Vec::<String>::new()));
        }
    }
    out
}

fn environment_of(toks: &[Tok], lexicon: &LexiconClassifier) -> Option<EnvironmentDesc> {
    let j = toks.iter().position(|t| lexicon.is_habitat_noun(&t.w))?;
    let mut attrs = Vec::new();
    let mut i = j;
    while i > 0 && j - i < 2 && !toks[i].brk {
        let m = &toks[i - 1].w;
        if is_stopword(m) || is_determiner(m) || is_preposition(m) || verbs().lemma(m).is_some() {
            break;
        }
        attrs.insert(0, m.clone());
        i -= 1;
    }
    Some(NounPhrase::new(toks[j].w.clone(), attrs))
}

/// Fills an F-B-Cs-in-E frame from labeled sentences in source order.
pub fn build_frame(
    id: &str,
    sentences: &[LabeledSentence],
    summarizer: &dyn Summarizer,
) -> Result<StrategyFrame, InversionError> {
    let missing: Vec<Dimension> = [Dimension::Function, Dimension::Characteristic]
        .into_iter()
        .filter(|d| !sentences.iter().any(|s| s.has(*d)))
        .collect();
    if !missing.is_empty() {
        return Err(InversionError::MissingDimension(missing));
    }
    let lexicon = LexiconClassifier::shared();

    let mut functions = Vec::new();
    let mut steps = Vec::new();
    let mut links = Vec::new();
    let mut characteristics = Vec::new();
    let mut environment = None;
    let mut seen_f = HashSet::new();
    let mut seen_c = HashSet::new();
    for s in sentences {
        let toks = tokens(&s.sentence.text);
        if s.has(Dimension::Function) {
            if let Some(f) = extract_function(&toks) {
                if seen_f.insert(phrase_key(&f.phrase())) {
                    functions.push(f);
                }
            }
        }
        if s.has(Dimension::Behavior) {
            let (st, ln) = behavior_of(&toks, steps.len());
            steps.extend(st);
            links.extend(ln);
        }
        if s.has(Dimension::Characteristic) {
            for c in characteristics_of(&toks, lexicon) {
                if seen_c.insert(phrase_key(&c.phrase())) {
                    characteristics.push(c);
                }
            }
        }
        if s.has(Dimension::Environment) && environment.is_none() {
            environment = environment_of(&toks, lexicon);
        }
    }
    let mut missing = Vec::new();
    if functions.is_empty() {
        missing.push(Dimension::Function);
    }
    if characteristics.is_empty() {
        missing.push(Dimension::Characteristic);
    }
    if !missing.is_empty() {
        return Err(InversionError::MissingDimension(missing));
    }

    let used: Vec<&LabeledSentence> = sentences.iter().collect();
    let summary = summarizer.summarize(&used, &steps, &functions)?;
    Ok(StrategyFrame {
        id: FrameId::new(id),
        behavior: Behavior {
            summary,
            steps,
            causal_links: links,
        },
        functions,
        characteristics,
        environment,
        provenance: Provenance {
            source_doc: sentences
                .first()
                .map(|s| s.sentence.doc_id.clone())
                .unwrap_or_default(),
            sentence_ids: sentences.iter().map(|s| s.sentence.id.clone()).collect(),
            elementary_ids: Vec::new(),
            notes: String::new(),
        },
    })
}
