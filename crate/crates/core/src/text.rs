//! Tokenization and surface-form helpers shared by the text-facing modules.

use std::collections::BTreeSet;

/// Function words ignored when comparing phrases by content.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "based", "be", "been", "by", "each", "for", "from", "in",
    "into", "is", "it", "its", "of", "on", "or", "that", "the", "their", "them", "then", "these",
    "this", "those", "through", "to", "was", "were", "when", "which", "while", "with", "within",
];

/// Words that open a post-nominal modifier ("nozzle based on rigid support").
pub const POST_MODIFIER_LEADS: &[&str] = &[
    "based", "with", "of", "in", "on", "for", "made", "arranged", "composed", "covered", "from",
    "under", "along", "at", "inside", "within", "without", "to",
];

pub const PREPOSITIONS: &[&str] = &[
    "about", "across", "after", "against", "along", "around", "at", "before", "behind", "below",
    "between", "by", "during", "for", "from", "in", "inside", "into", "of", "on", "onto", "over",
    "through", "to", "toward", "towards", "under", "via", "with", "within", "without",
];

pub const DETERMINERS: &[&str] = &[
    "a", "an", "the", "its", "their", "this", "that", "these", "those", "each", "every", "his",
    "her", "our", "some", "any",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&word)
}

pub fn is_preposition(word: &str) -> bool {
    PREPOSITIONS.contains(&word)
}

pub fn is_determiner(word: &str) -> bool {
    DETERMINERS.contains(&word)
}

/// Byte spans of the words in `s`. A word is a run of alphanumerics, allowing
/// internal hyphens and apostrophes ("diamond-shaped", "fish's").
pub fn word_spans(s: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start: Option<usize> = None;
    let mut last_end = 0;
    let chars: Vec<(usize, char)> = s.char_indices().collect();
    for (i, &(pos, ch)) in chars.iter().enumerate() {
        let joiner = (ch == '-' || ch == '\'')
            && start.is_some()
            && chars.get(i + 1).is_some_and(|(_, n)| n.is_alphanumeric());
        if ch.is_alphanumeric() || joiner {
            if start.is_none() {
                start = Some(pos);
            }
            last_end = pos + ch.len_utf8();
        } else if let Some(st) = start.take() {
            spans.push((st, last_end));
        }
    }
    if let Some(st) = start {
        spans.push((st, last_end));
    }
    spans
}

/// Lowercased words of `s`.
pub fn words(s: &str) -> Vec<String> {
    word_spans(s)
        .into_iter()
        .map(|(a, b)| s[a..b].to_lowercase())
        .collect()
}

pub fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Equality key for phrases: whitespace collapsed, case folded.
pub fn phrase_key(s: &str) -> String {
    collapse_ws(s).to_lowercase()
}

/// Crude suffix-stripping stem used only for similarity scoring.
pub fn stem(word: &str) -> String {
    let mut w = word.to_lowercase();
    if w.len() > 5 && w.ends_with("ing") {
        w.truncate(w.len() - 3);
    } else if w.len() > 4 && w.ends_with("ies") {
        w.truncate(w.len() - 3);
        w.push('y');
    } else if w.len() > 3 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") {
        w.truncate(w.len() - 1);
    } else if w.len() > 4 && w.ends_with("ed") {
        w.truncate(w.len() - 2);
    }
    if w.len() > 3 && w.ends_with('e') {
        w.truncate(w.len() - 1);
    }
    let b = w.as_bytes();
    if b.len() > 3 {
        let (x, y) = (b[b.len() - 1], b[b.len() - 2]);
        if x == y && !matches!(x, b'l' | b's' | b'f' | b'z' | b'e' | b'o') {
            w.truncate(w.len() - 1);
        }
    }
    w
}

/// Stemmed content words of `s` with stopwords removed.
pub fn content_stems(s: &str) -> BTreeSet<String> {
    words(s)
        .into_iter()
        .filter(|w| !is_stopword(w))
        .map(|w| stem(&w))
        .collect()
}

/// Jaccard overlap; two empty sets are identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    let inter = a.intersection(b).count() as f64;
    let union = a.union(b).count() as f64;
    inter / union
}

/// Upper-cases the first character when `like` starts with an uppercase letter.
pub fn match_capital(replacement: &str, like: &str) -> String {
    if like.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}
