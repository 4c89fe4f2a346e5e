use serde::{Deserialize, Serialize};

use super::EngineeringKB;
use crate::knowledge::StrategyFrame;
use crate::text::{is_preposition, match_capital, word_spans};

/// A whole-word occurrence of term `term` at byte range `start..end`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermHit {
    pub term: usize,
    pub start: usize,
    pub end: usize,
    /// Plural ending found after the term's last word ("s" or "es").
    pub suffix: String,
}

/// Non-overlapping occurrences of `terms` in `text`, scanning left to right
/// and preferring the term with the most words, then the longest.
pub fn find_terms(text: &str, terms: &[&str]) -> Vec<TermHit> {
    let spans = word_spans(text);
    let toks: Vec<String> = spans.iter().map(|&(a, b)| text[a..b].to_lowercase()).collect();
    let term_toks: Vec<Vec<String>> = terms
        .iter()
        .map(|t| word_spans(t).iter().map(|&(a, b)| t[a..b].to_lowercase()).collect())
        .collect();
    let mut order: Vec<usize> = (0..terms.len()).filter(|&i| !term_toks[i].is_empty()).collect();
    order.sort_by(|&a, &b| {
        term_toks[b]
            .len()
            .cmp(&term_toks[a].len())
            .then(terms[b].len().cmp(&terms[a].len()))
            .then(a.cmp(&b))
    });

    let mut hits = Vec::new();
    let mut i = 0;
    'scan: while i < toks.len() {
        for &t in &order {
            let tt = &term_toks[t];
            let k = tt.len();
            if i + k > toks.len() {
                continue;
            }
            let joined_by_space = (i..i + k - 1)
                .all(|j| text[spans[j].1..spans[j + 1].0].chars().all(char::is_whitespace));
            if !joined_by_space || toks[i..i + k - 1] != tt[..k - 1] {
                continue;
            }
            let last = &toks[i + k - 1];
            let suffix = if *last == tt[k - 1] {
                ""
            } else if last.strip_suffix("es") == Some(tt[k - 1].as_str()) {
                "es"
            } else if last.strip_suffix('s') == Some(tt[k - 1].as_str()) {
                "s"
            } else {
                continue;
            };
            hits.push(TermHit {
                term: t,
                start: spans[i].0,
                end: spans[i + k - 1].1,
                suffix: suffix.to_string(),
            });
            i += k;
            continue 'scan;
        }
        i += 1;
    }
    hits
}

/// A replaced span inside one text: `matched` at byte `offset` became `replacement`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Replaced {
    pub pair: usize,
    pub offset: usize,
    pub matched: String,
    pub replacement: String,
}

/// Replaces every occurrence of each `(from, to)` pair, longest match first.
pub fn replace_terms(text: &str, pairs: &[(&str, &str)]) -> (String, Vec<Replaced>) {
    let froms: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    let mut out = String::with_capacity(text.len());
    let mut done = Vec::new();
    let mut cursor = 0;
    for hit in find_terms(text, &froms) {
        let start = absorb_repeat(text, cursor, hit.start, pairs[hit.term].1);
        let matched = &text[start..hit.end];
        let replacement = match_capital(&format!("{}{}", pairs[hit.term].1, hit.suffix), matched);
        out.push_str(&text[cursor..start]);
        out.push_str(&replacement);
        cursor = hit.end;
        done.push(Replaced {
            pair: hit.term,
            offset: start,
            matched: matched.to_string(),
            replacement,
        });
    }
    out.push_str(&text[cursor..]);
    (out, done)
}

/// Start of the span to replace: the match itself, or the word before it
/// when the replacement opens with that same word ("flexible caudal fin"
/// with "flexible fin" must not become "flexible flexible fin").
fn absorb_repeat(text: &str, floor: usize, start: usize, replacement: &str) -> usize {
    let Some(first) = replacement.split_whitespace().next() else {
        return start;
    };
    let before = text[floor..start].trim_end_matches(' ');
    if before.len() + floor == start {
        return start;
    }
    let word_start = before
        .char_indices()
        .rev()
        .find(|(_, c)| !(c.is_alphanumeric() || *c == '-'))
        .map_or(0, |(i, c)| i + c.len_utf8());
    if before[word_start..].eq_ignore_ascii_case(first) {
        floor + word_start
    } else {
        start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub path: String,
    pub bio_term: String,
    pub eng_term: String,
    pub offset: usize,
    pub matched: String,
    pub replacement: String,
}

/// Pass 1: KB mappings applied to every text unit of the frame.
pub fn substitute(frame: &StrategyFrame, kb: &EngineeringKB) -> (StrategyFrame, Vec<Substitution>) {
    let pairs: Vec<(&str, &str)> = kb
        .mappings
        .iter()
        .map(|m| (m.bio_term.as_str(), m.eng_term.as_str()))
        .collect();
    let mut out = frame.clone();
    let mut subs = Vec::new();
    for unit in frame.text_units() {
        let (text, done) = replace_terms(&unit.text, &pairs);
        if done.is_empty() {
            continue;
        }
        out.set_text_unit(&unit.path, &text);
        subs.extend(done.into_iter().map(|r| Substitution {
            path: unit.path.clone(),
            bio_term: kb.mappings[r.pair].bio_term.clone(),
            eng_term: kb.mappings[r.pair].eng_term.clone(),
            offset: r.offset,
            matched: r.matched,
            replacement: r.replacement,
        }));
    }
    (out, subs)
}

/// Re-applies recorded substitutions to `source`, last offset first per slot.
pub fn apply_substitutions(source: &StrategyFrame, subs: &[Substitution]) -> StrategyFrame {
    let mut out = source.clone();
    let mut paths: Vec<&str> = subs.iter().map(|s| s.path.as_str()).collect();
    paths.dedup();
    for path in paths {
        let Some(mut text) = source.text_unit(path) else {
            continue;
        };
        let mut here: Vec<&Substitution> = subs.iter().filter(|s| s.path == path).collect();
        here.sort_by_key(|s| std::cmp::Reverse(s.offset));
        for s in here {
            let end = s.offset + s.matched.len();
            if text.get(s.offset..end) == Some(s.matched.as_str()) {
                text.replace_range(s.offset..end, &s.replacement);
            }
        }
        out.set_text_unit(path, &text);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unresolved {
    pub path: String,
    pub term: String,
}

/// Slots whose head noun is not covered by any vocabulary term.
///
/// The head of a characteristic or environment is its head noun; the head of
/// a function object is its last word before the first preposition, skipping
/// trailing "-ly" adverbs.
pub fn unresolved_terms(frame: &StrategyFrame, kb: &EngineeringKB) -> Vec<Unresolved> {
    let vocab: Vec<&str> = kb.vocabulary.iter().map(String::as_str).collect();
    let mut out = Vec::new();
    for unit in frame.text_units() {
        let is_slot = unit.path.starts_with("/characteristics/")
            || unit.path == "/environment"
            || unit.path.starts_with("/functions/");
        if !is_slot {
            continue;
        }
        let Some((head_start, head_end)) = head_span(&unit.path, &unit.text, frame) else {
            continue;
        };
        let covered = find_terms(&unit.text, &vocab)
            .iter()
            .any(|h| h.start <= head_start && h.end == head_end);
        if !covered {
            out.push(Unresolved {
                path: unit.path.clone(),
                term: unit.text[head_start..head_end].to_string(),
            });
        }
    }
    out
}

fn head_span(path: &str, text: &str, frame: &StrategyFrame) -> Option<(usize, usize)> {
    let spans = word_spans(text);
    let lower = |(a, b): (usize, usize)| text[a..b].to_lowercase();
    if path.starts_with("/functions/") {
        let cut = spans
            .iter()
            .position(|&s| is_preposition(&lower(s)))
            .unwrap_or(spans.len());
        spans[..cut]
            .iter()
            .rev()
            .find(|&&s| !lower(s).ends_with("ly"))
            .copied()
    } else {
        let np = if path == "/environment" {
            frame.environment.as_ref()?
        } else {
            let i: usize = path.rsplit('/').next()?.parse().ok()?;
            frame.characteristics.get(i)?
        };
        let head = np.head.to_lowercase();
        spans.iter().find(|&&s| lower(s) == head).copied()
    }
}
