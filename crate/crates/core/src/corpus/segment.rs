use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Byte span of a sentence within its source document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub span: Span,
}

impl SentenceRecord {
    /// A free-standing sentence not tied to a segmented document.
    pub fn standalone(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        SentenceRecord {
            id: id.into(),
            doc_id: String::new(),
            span: Span {
                start: 0,
                end: text.len(),
            },
            text,
        }
    }
}

const ASCII_TERMINALS: &[char] = &['.', '!', '?'];
const CJK_TERMINALS: &[char] = &['。', '！', '？'];
const OPENERS: &[char] = &['(', '[', '{', '（', '【', '「'];
const CLOSERS: &[char] = &[')', ']', '}', '）', '】', '」'];
const TRAILING_CLOSERS: &[char] = &['"', '\'', '”', '’', '»', '」', '）', ')'];

/// Words that end in a period without ending the sentence.
const ABBREVIATIONS: &[&str] = &[
    "e.g", "i.e", "al", "fig", "figs", "ref", "refs", "cf", "approx", "vs", "mr", "mrs", "ms", "dr",
    "prof", "no", "eq", "eqs", "ca", "resp", "sp", "spp",
];

pub fn sentence_id(doc_id: &str, index: usize) -> String {
    format!("{doc_id}-s{:04}", index + 1)
}

/// Splits a document on sentence-terminal punctuation outside bracketed spans.
///
/// Spans are byte offsets; only whitespace lies between consecutive spans.
pub fn segment(document: &str, doc_id: &str) -> Result<Vec<SentenceRecord>, CorpusError> {
    if document.trim().is_empty() {
        return Err(CorpusError::EmptyDocument(doc_id.to_string()));
    }
    let chars: Vec<(usize, char)> = document.char_indices().collect();
    let mut spans: Vec<Span> = Vec::new();
    let mut start: Option<usize> = None;
    let mut depth: usize = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, ch) = chars[i];
        if start.is_none() {
            if ch.is_whitespace() {
                i += 1;
                continue;
            }
            start = Some(pos);
        }
        if OPENERS.contains(&ch) {
            depth += 1;
        } else if CLOSERS.contains(&ch) {
            depth = depth.saturating_sub(1);
        }
        let terminal = ASCII_TERMINALS.contains(&ch) || CJK_TERMINALS.contains(&ch);
        if !terminal || depth > 0 {
            i += 1;
            continue;
        }
        // Consume the terminal run and any closing quotes after it.
        let mut j = i + 1;
        while j < chars.len()
            && (ASCII_TERMINALS.contains(&chars[j].1) || CJK_TERMINALS.contains(&chars[j].1))
        {
            j += 1;
        }
        let run_len = j - i;
        while j < chars.len() && TRAILING_CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(document.len(), |(p, _)| *p);
        let cjk = CJK_TERMINALS.contains(&ch);
        let followed_by_space = chars.get(j).is_none_or(|(_, c)| c.is_whitespace());
        let abbreviation = ch == '.' && run_len == 1 && is_abbreviation(document, pos);
        if cjk || (followed_by_space && !abbreviation) {
            spans.push(Span {
                start: start.take().unwrap_or(pos),
                end,
            });
            depth = 0;
        }
        i = j;
    }
    if let Some(st) = start {
        let end = st + document[st..].trim_end().len();
        spans.push(Span { start: st, end });
    }
    Ok(spans
        .into_iter()
        .enumerate()
        .map(|(n, span)| SentenceRecord {
            id: sentence_id(doc_id, n),
            doc_id: doc_id.to_string(),
            text: document[span.start..span.end].to_string(),
            span,
        })
        .collect())
}

/// Whether the word ending at the period at byte `dot` is a known abbreviation.
fn is_abbreviation(document: &str, dot: usize) -> bool {
    let before = &document[..dot];
    let word_start = before
        .rfind(|c: char| c.is_whitespace() || OPENERS.contains(&c))
        .map_or(0, |p| p + before[p..].chars().next().map_or(1, char::len_utf8));
    let word = before[word_start..].to_lowercase();
    ABBREVIATIONS.contains(&word.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts(doc: &str) -> Vec<String> {
        segment(doc, "d").unwrap().into_iter().map(|s| s.text).collect()
    }

    #[test]
    fn two_terminals() {
        assert_eq!(texts("A swims. B crawls."), ["A swims.", "B crawls."]);
    }

    #[test]
    fn bracketed_abbreviation_does_not_split() {
        assert_eq!(texts("It shrinks (approx. 63%) fast."), ["It shrinks (approx. 63%) fast."]);
    }

    #[test]
    fn empty_document() {
        assert!(matches!(segment("", "d"), Err(CorpusError::EmptyDocument(_))));
        assert!(matches!(segment("  \n", "d"), Err(CorpusError::EmptyDocument(_))));
    }

    #[test]
    fn ids_and_spans() {
        let doc = "  One.  Two!\nThree";
        let recs = segment(doc, "doc").unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].id, "doc-s0001");
        assert_eq!(recs[2].text, "Three");
        for r in &recs {
            assert_eq!(&doc[r.span.start..r.span.end], r.text);
        }
    }
}
