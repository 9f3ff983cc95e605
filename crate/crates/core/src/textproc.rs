//! Tokenization, n-gram counting and entity-span extraction.

use std::collections::HashMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::lexicon::{normalize_surface, EntityId, EntityLexicon};

/// Sentence punctuation split off the end of a word.
pub const TERMINAL_PUNCT: [char; 6] = ['.', ',', ';', ':', '!', '?'];

/// Normalized tokens of a text, plus the byte range each token came from in
/// the original string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub offsets: Vec<Range<usize>>,
    pub source: String,
}

impl TokenizedText {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Byte range in `source` covered by tokens `start..start + len`.
    pub fn source_range(&self, start: usize, len: usize) -> Range<usize> {
        self.offsets[start].start..self.offsets[start + len - 1].end
    }
}

fn split_terminal_punct(word: &str) -> (&str, Vec<char>) {
    let mut core = word;
    let mut punct = Vec::new();
    while let Some(c) = core.chars().next_back() {
        if !TERMINAL_PUNCT.contains(&c) {
            break;
        }
        punct.push(c);
        core = &core[..core.len() - c.len_utf8()];
    }
    punct.reverse();
    (core, punct)
}

fn push_parts(out: &mut TokenizedText, norm: &str, range: Range<usize>) {
    for part in norm.split(' ') {
        let (core, punct) = split_terminal_punct(part);
        if !core.is_empty() {
            out.tokens.push(core.to_string());
            out.offsets.push(range.clone());
        }
        for p in punct {
            out.tokens.push(p.to_string());
            out.offsets.push(range.clone());
        }
    }
}

fn push_word(out: &mut TokenizedText, raw: &str, base: usize) {
    let norm = normalize_surface(raw);
    if norm.is_empty() {
        return;
    }
    let whole = base..base + raw.len();
    if norm.contains(' ') {
        // Compatibility folding introduced a space; offsets fall back to the
        // whole raw word.
        push_parts(out, &norm, whole);
        return;
    }
    let (core, punct) = split_terminal_punct(&norm);

    // Walk the raw word backwards to find the character behind each trailing
    // punctuation token.
    let mut end = raw.len();
    let mut punct_ranges = Vec::with_capacity(punct.len());
    for p in punct.iter().rev() {
        match raw[..end].char_indices().next_back() {
            Some((i, c))
                if normalize_surface(c.encode_utf8(&mut [0; 4]))
                    .chars()
                    .eq(std::iter::once(*p)) =>
            {
                punct_ranges.push(base + i..base + end);
                end = i;
            }
            _ => {
                push_parts(out, &norm, whole);
                return;
            }
        }
    }
    punct_ranges.reverse();
    if !core.is_empty() {
        out.tokens.push(core.to_string());
        out.offsets.push(base..base + end);
    }
    for (p, r) in punct.into_iter().zip(punct_ranges) {
        out.tokens.push(p.to_string());
        out.offsets.push(r);
    }
}

/// Normalize, split on whitespace, then split trailing sentence punctuation
/// into separate tokens. Hyphens and parentheses stay attached, so "(-OH)"
/// is the single token "(-oh)".
pub fn tokenize(text: &str) -> TokenizedText {
    let mut out = TokenizedText {
        tokens: Vec::new(),
        offsets: Vec::new(),
        source: text.to_string(),
    };
    let mut word_start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = word_start.take() {
                push_word(&mut out, &text[s..i], s);
            }
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    if let Some(s) = word_start {
        push_word(&mut out, &text[s..], s);
    }
    out
}

/// Multiset of n-grams, keyed by token windows borrowed from the text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramMultiset<'a> {
    pub order: usize,
    pub counts: HashMap<&'a [String], usize>,
}

impl<'a> NGramMultiset<'a> {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn count(&self, gram: &[String]) -> usize {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Σ over our n-grams of min(our count, other count).
    pub fn clipped_overlap(&self, other: &NGramMultiset<'_>) -> usize {
        self.counts.iter().map(|(gram, &c)| c.min(other.count(gram))).sum()
    }
}

fn check_order(order: usize) -> Result<()> {
    if (1..=4).contains(&order) {
        Ok(())
    } else {
        Err(Error::Invalid(format!("n-gram order must be in 1..=4, got {order}")))
    }
}

pub fn extract_ngrams(tokens: &[String], order: usize) -> Result<NGramMultiset<'_>> {
    extract_ngrams_where(tokens, order, |_| true)
}

/// N-grams whose every token index satisfies `keep`.
pub fn extract_ngrams_where<F>(tokens: &[String], order: usize, keep: F) -> Result<NGramMultiset<'_>>
where
    F: Fn(usize) -> bool,
{
    check_order(order)?;
    let mut counts = HashMap::new();
    if tokens.len() >= order {
        for start in 0..=tokens.len() - order {
            if (start..start + order).all(&keep) {
                *counts.entry(&tokens[start..start + order]).or_insert(0) += 1;
            }
        }
    }
    Ok(NGramMultiset { order, counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EntitySpan {
    pub start: usize,
    pub len: usize,
    pub record: EntityId,
}

impl EntitySpan {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    /// N-gram order this span is scored under: its token length, capped at 4.
    pub fn order(&self) -> usize {
        self.len.min(4)
    }
}

/// Greedy leftmost-longest scan. Spans are sorted and never overlap.
pub fn extract_entity_spans<S: AsRef<str>>(tokens: &[S], lexicon: &EntityLexicon) -> Vec<EntitySpan> {
    let mut spans = Vec::new();
    let mut pos = 0;
    while pos < tokens.len() {
        match lexicon.lookup_longest(tokens, pos) {
            Some((record, len)) => {
                spans.push(EntitySpan {
                    start: pos,
                    len,
                    record,
                });
                pos += len;
            }
            None => pos += 1,
        }
    }
    spans
}

pub fn extract_entities(text: &TokenizedText, lexicon: &EntityLexicon) -> Vec<EntitySpan> {
    extract_entity_spans(&text.tokens, lexicon)
}

/// Per-token flag: true where the token belongs to one of `spans`.
pub fn entity_mask(len: usize, spans: &[EntitySpan]) -> Vec<bool> {
    let mut mask = vec![false; len];
    for s in spans {
        mask[s.start..s.end()].iter_mut().for_each(|m| *m = true);
    }
    mask
}
