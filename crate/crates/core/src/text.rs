//! Tokenization, sentence splitting and span arithmetic.
//!
//! All offsets are character offsets into the raw text, not byte offsets, so
//! spans stay valid on non-ASCII input. Tokens keep their original case.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::TextError;

/// A word or punctuation unit with its `[start, end)` character range.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// True when the token carries at least one alphanumeric character.
    pub fn is_word(&self) -> bool {
        self.surface.chars().any(char::is_alphanumeric)
    }
}

/// A contiguous run of tokens, `last_token` inclusive.
///
/// `surface` is the raw text covered by the run, so for single-spaced text it
/// equals the space-joined token surfaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub first_token: usize,
    pub last_token: usize,
    pub surface: String,
}

impl Span {
    pub fn len(&self) -> usize {
        self.last_token - self.first_token + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.first_token <= other.last_token && other.first_token <= self.last_token
    }
}

/// Tokenized text. Sentence bounds partition the token sequence in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub raw_text: String,
    pub tokens: Vec<Token>,
    pub sentence_bounds: Vec<(usize, usize)>,
    /// Byte offset of every char boundary, including the end of the text.
    byte_offsets: Vec<usize>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        let mut doc = tokenize(text);
        doc.id = id.into();
        doc
    }

    /// Number of characters in `raw_text`.
    pub fn char_len(&self) -> usize {
        self.byte_offsets.len() - 1
    }

    /// Raw text between two character offsets.
    pub fn slice(&self, start: usize, end: usize) -> &str {
        &self.raw_text[self.byte_offsets[start]..self.byte_offsets[end]]
    }

    /// Builds a validated span over `first..=last`.
    pub fn span(&self, first: usize, last: usize) -> Result<Span, TextError> {
        if first > last || last >= self.tokens.len() {
            return Err(TextError::InvalidSpan {
                first,
                last,
                tokens: self.tokens.len(),
            });
        }
        Ok(Span {
            first_token: first,
            last_token: last,
            surface: self
                .slice(self.tokens[first].start, self.tokens[last].end)
                .to_string(),
        })
    }

    /// Character range covered by a span.
    pub fn span_range(&self, span: &Span) -> (usize, usize) {
        (
            self.tokens[span.first_token].start,
            self.tokens[span.last_token].end,
        )
    }

    pub fn check_span(&self, span: &Span) -> Result<(), TextError> {
        let valid = self.span(span.first_token, span.last_token)?;
        if valid.surface != span.surface {
            return Err(TextError::SurfaceMismatch {
                expected: valid.surface,
                found: span.surface.clone(),
            });
        }
        Ok(())
    }

    /// Lowercased surfaces of the tokens, used for lexicon lookups and features.
    pub fn normalized_tokens(&self) -> Vec<String> {
        self.tokens.iter().map(|t| normalize(&t.surface)).collect()
    }
}

/// Lowercases and folds typographic apostrophes/hyphens to ASCII.
pub fn normalize(surface: &str) -> String {
    surface
        .chars()
        .map(|c| match c {
            '\u{2019}' | '\u{2018}' => '\'',
            '\u{2010}' | '\u{2011}' => '-',
            other => other,
        })
        .flat_map(char::to_lowercase)
        .collect()
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}' | '\u{2010}' | '\u{2011}')
}

/// Splits text into word and punctuation tokens.
///
/// Words are maximal alphanumeric runs; a hyphen or apostrophe between two
/// alphanumerics stays inside the word ("Don't", "anti-Asian"). Every other
/// non-whitespace character becomes a token of its own.
pub fn tokenize(text: &str) -> Document {
    let chars: Vec<char> = text.chars().collect();
    let mut byte_offsets: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    byte_offsets.push(text.len());

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            i += 1;
            while i < chars.len() {
                if chars[i].is_alphanumeric() {
                    i += 1;
                } else if is_joiner(chars[i])
                    && i + 1 < chars.len()
                    && chars[i + 1].is_alphanumeric()
                {
                    i += 2;
                } else {
                    break;
                }
            }
        } else {
            i += 1;
        }
        tokens.push(Token {
            surface: text[byte_offsets[start]..byte_offsets[i]].to_string(),
            start,
            end: i,
        });
    }

    let sentence_bounds = sentence_bounds(text, &tokens);
    Document {
        id: String::new(),
        raw_text: text.to_string(),
        tokens,
        sentence_bounds,
        byte_offsets,
    }
}

fn sentence_bounds(text: &str, tokens: &[Token]) -> Vec<(usize, usize)> {
    let mut bounds = Vec::new();
    let mut next_token = 0;
    let mut piece_end = 0;
    for piece in split_sentences(text) {
        piece_end += piece.chars().count();
        let first = next_token;
        while next_token < tokens.len() && tokens[next_token].start < piece_end {
            next_token += 1;
        }
        if next_token > first {
            bounds.push((first, next_token - 1));
        }
    }
    bounds
}

/// Replaces the character range of each span with its replacement text.
///
/// Characters outside the replaced spans are copied unchanged.
pub fn detokenize<S: AsRef<str>>(
    document: &Document,
    replacements: &[(Span, S)],
) -> Result<String, TextError> {
    let mut ordered: Vec<&(Span, S)> = replacements.iter().collect();
    ordered.sort_by_key(|(span, _)| span.first_token);
    for (span, _) in &ordered {
        document.check_span(span)?;
    }
    for pair in ordered.windows(2) {
        if pair[0].0.overlaps(&pair[1].0) {
            return Err(TextError::OverlappingSpans {
                left: pair[0].0.surface.clone(),
                right: pair[1].0.surface.clone(),
            });
        }
    }

    let mut out = String::with_capacity(document.raw_text.len());
    let mut cursor = 0;
    for (span, replacement) in ordered {
        let (start, end) = document.span_range(span);
        out.push_str(document.slice(cursor, start));
        out.push_str(replacement.as_ref());
        cursor = end;
    }
    out.push_str(document.slice(cursor, document.char_len()));
    Ok(out)
}

const DEFAULT_ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "inc", "ltd", "co", "corp",
    "gen", "gov", "sen", "rep", "rev", "lt", "col", "sgt", "capt", "u.s", "u.k", "e.g", "i.e",
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "no",
    "fig",
];

/// Rule-based sentence splitter.
///
/// A boundary is a run of `.`, `!` or `?` (plus closing quotes/brackets),
/// followed by whitespace and an uppercase letter. With the guard enabled,
/// periods after listed abbreviations or single-letter initials do not split.
#[derive(Debug, Clone)]
pub struct SentenceSplitter {
    abbreviations: HashSet<String>,
    guard: bool,
}

impl Default for SentenceSplitter {
    fn default() -> Self {
        Self {
            abbreviations: DEFAULT_ABBREVIATIONS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            guard: true,
        }
    }
}

impl SentenceSplitter {
    pub fn without_guard() -> Self {
        Self {
            abbreviations: HashSet::new(),
            guard: false,
        }
    }

    pub fn with_abbreviations<I, S>(abbreviations: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            abbreviations: abbreviations.into_iter().map(Into::into).collect(),
            guard: true,
        }
    }

    /// Splits `text` into pieces whose concatenation is exactly `text`.
    ///
    /// Each piece carries its trailing whitespace; leading whitespace of the
    /// input belongs to the first piece.
    pub fn split<'a>(&self, text: &'a str) -> Vec<&'a str> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut pieces = Vec::new();
        let mut piece_start = 0;
        let mut i = 0;
        while i < chars.len() {
            let (_, c) = chars[i];
            if !matches!(c, '.' | '!' | '?') {
                i += 1;
                continue;
            }
            let terminal = i;
            let mut j = i + 1;
            while j < chars.len() && is_closer(chars[j].1) {
                j += 1;
            }
            let ws_start = j;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            if j == ws_start || j >= chars.len() || !starts_sentence(&chars[j..]) {
                i = ws_start.max(i + 1);
                continue;
            }
            if c == '.' && self.guard && self.is_guarded(&chars[..terminal]) {
                i = j;
                continue;
            }
            let boundary = chars[j].0;
            pieces.push(&text[piece_start..boundary]);
            piece_start = boundary;
            i = j;
        }
        if piece_start < text.len() {
            pieces.push(&text[piece_start..]);
        }
        pieces
    }

    fn is_guarded(&self, before: &[(usize, char)]) -> bool {
        let word: String = before
            .iter()
            .rev()
            .take_while(|(_, c)| c.is_alphanumeric() || *c == '.')
            .map(|(_, c)| *c)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect();
        if word.is_empty() {
            return false;
        }
        let mut letters = word.chars();
        let single_initial = matches!(
            (letters.next(), letters.next()),
            (Some(first), None) if first.is_uppercase()
        );
        single_initial || self.abbreviations.contains(&word.to_lowercase())
    }
}

fn is_closer(c: char) -> bool {
    matches!(
        c,
        '.' | '!' | '?' | '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}'
    )
}

fn starts_sentence(rest: &[(usize, char)]) -> bool {
    match rest {
        [(_, c), ..] if c.is_uppercase() || c.is_ascii_digit() => true,
        [(_, '"' | '\'' | '(' | '\u{201c}' | '\u{2018}'), (_, c), ..] => c.is_uppercase(),
        _ => false,
    }
}

/// Splits with the default abbreviation guard.
pub fn split_sentences(text: &str) -> Vec<&str> {
    SentenceSplitter::default().split(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(doc: &Document) -> Vec<&str> {
        doc.tokens.iter().map(|t| t.surface.as_str()).collect()
    }

    fn assert_offsets(doc: &Document) {
        let chars: Vec<char> = doc.raw_text.chars().collect();
        for t in &doc.tokens {
            let slice: String = chars[t.start..t.end].iter().collect();
            assert_eq!(slice, t.surface);
        }
    }

    #[test]
    fn empty_text_has_no_tokens() {
        let doc = tokenize("");
        assert!(doc.tokens.is_empty());
        assert!(doc.sentence_bounds.is_empty());
        assert_eq!(detokenize::<&str>(&doc, &[]).unwrap(), "");
    }

    #[test]
    fn contraction_stays_whole() {
        let doc = tokenize("Don't buy the hype.");
        assert_eq!(surfaces(&doc), ["Don't", "buy", "the", "hype", "."]);
        assert_offsets(&doc);
        assert_eq!((doc.tokens[3].start, doc.tokens[3].end), (14, 18));
    }

    #[test]
    fn hyphenated_word_stays_whole() {
        let doc = tokenize("anti-Asian derogatory term");
        assert_eq!(surfaces(&doc), ["anti-Asian", "derogatory", "term"]);
        assert_offsets(&doc);
    }

    #[test]
    fn dangling_hyphen_is_its_own_token() {
        let doc = tokenize("well- known -- yes");
        assert_eq!(surfaces(&doc), ["well", "-", "known", "-", "-", "yes"]);
    }

    #[test]
    fn offsets_are_characters_not_bytes() {
        let doc = tokenize("Café “naïve” test");
        assert_eq!(surfaces(&doc), ["Café", "“", "naïve", "”", "test"]);
        assert_eq!(doc.tokens[2].start, 6);
        assert_offsets(&doc);
    }

    #[test]
    fn detokenize_replaces_phrase() {
        let text = "Don't buy the pseudo-scientific hype about tornadoes and climate change";
        let doc = tokenize(text);
        let span = doc.span(3, 4).unwrap();
        assert_eq!(span.surface, "pseudo-scientific hype");
        let out = detokenize(&doc, &[(span, "information")]).unwrap();
        assert_eq!(
            out,
            "Don't buy the information about tornadoes and climate change"
        );
    }

    #[test]
    fn detokenize_two_disjoint_spans() {
        let text = "A  quick, brown fox  jumps.";
        let doc = tokenize(text);
        // quick = token 1, fox = token 4
        let a = doc.span(1, 1).unwrap();
        let b = doc.span(4, 4).unwrap();
        let out = detokenize(&doc, &[(b, "cat"), (a, "slow")]).unwrap();
        // splice oracle over characters
        let expected = format!("{}slow{}cat{}", &text[..3], &text[8..16], &text[19..]);
        assert_eq!(out, expected);
        assert_eq!(out, "A  slow, brown cat  jumps.");
    }

    #[test]
    fn detokenize_rejects_overlap() {
        let doc = tokenize("one two three four");
        let a = doc.span(0, 1).unwrap();
        let b = doc.span(1, 2).unwrap();
        assert!(matches!(
            detokenize(&doc, &[(a, "x"), (b, "y")]),
            Err(TextError::OverlappingSpans { .. })
        ));
    }

    #[test]
    fn detokenize_rejects_stale_span() {
        let doc = tokenize("one two");
        let bad = Span {
            first_token: 0,
            last_token: 0,
            surface: "uno".into(),
        };
        assert!(detokenize(&doc, &[(bad, "x")]).is_err());
        let out_of_range = Span {
            first_token: 1,
            last_token: 5,
            surface: "two".into(),
        };
        assert!(detokenize(&doc, &[(out_of_range, "x")]).is_err());
    }

    #[test]
    fn initials_split_without_guard() {
        assert_eq!(
            SentenceSplitter::without_guard().split("A. B."),
            ["A. ", "B."]
        );
        assert_eq!(split_sentences("A. B."), ["A. B."]);
    }

    #[test]
    fn unterminated_single_sentence() {
        assert_eq!(split_sentences("no terminal here"), ["no terminal here"]);
    }

    #[test]
    fn news_paragraph_round_trips() {
        let text =
            "Mr. Smith said the plan failed. Critics called it \"a disaster.\" Others disagreed!";
        let pieces = split_sentences(text);
        assert_eq!(pieces.len(), 3);
        assert_eq!(pieces[0], "Mr. Smith said the plan failed. ");
        assert_eq!(pieces.concat(), text);
    }

    #[test]
    fn lowercase_after_period_does_not_split() {
        assert_eq!(split_sentences("It cost 3.5 dollars. e.g. this").len(), 1);
    }

    #[test]
    fn sentence_bounds_partition_tokens() {
        let doc = tokenize("First one here. Second one! Third");
        assert_eq!(doc.sentence_bounds, vec![(0, 3), (4, 6), (7, 7)]);
    }
}
