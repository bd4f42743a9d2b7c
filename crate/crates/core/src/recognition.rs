//! Bias-bearing span recognition.
//!
//! The built-in recognizer scans a document against a lexicon of biased
//! terms (one to three tokens) mined from annotated records, preferring the
//! longest match and, among equally long overlapping matches, the leftmost.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::MbicRecord;
use crate::error::{LexiconError, TagError};
use crate::text::{tokenize, Document, Span};

pub const MAX_TERM_TOKENS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub count_in_biased: u64,
    pub count_total: u64,
}

impl LexiconEntry {
    pub fn score(&self) -> f64 {
        self.count_in_biased as f64 / self.count_total as f64
    }
}

/// Normalized biased terms with their corpus counts.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

/// Normalizes a phrase to a lexicon key: lowercased word tokens joined by a
/// single space. Leading and trailing punctuation is dropped. Returns `None`
/// for phrases that are empty, longer than three tokens, or contain inner
/// punctuation (which could never match, since punctuation breaks matches).
pub fn normalize_term(phrase: &str) -> Option<String> {
    let doc = tokenize(phrase);
    let first = doc.tokens.iter().position(|t| t.is_word())?;
    let last = doc.tokens.iter().rposition(|t| t.is_word())?;
    let inner = &doc.tokens[first..=last];
    if inner.len() > MAX_TERM_TOKENS || inner.iter().any(|t| !t.is_word()) {
        return None;
    }
    Some(
        inner
            .iter()
            .map(|t| crate::text::normalize(&t.surface))
            .collect::<Vec<_>>()
            .join(" "),
    )
}

/// Keys of every 1..=3 token window of word tokens in `document`.
fn window_keys(document: &Document) -> impl Iterator<Item = (usize, usize, String)> + '_ {
    let normalized = document.normalized_tokens();
    let n = document.tokens.len();
    (0..n).flat_map(move |start| {
        let mut key = String::new();
        let mut out = Vec::new();
        for len in 1..=MAX_TERM_TOKENS {
            let idx = start + len - 1;
            if idx >= n || !document.tokens[idx].is_word() {
                break;
            }
            if len > 1 {
                key.push(' ');
            }
            key.push_str(&normalized[idx]);
            out.push((start, len, key.clone()));
        }
        out
    })
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, term: &str) -> Option<&LexiconEntry> {
        self.entries.get(term)
    }

    pub fn contains(&self, term: &str) -> bool {
        self.entries.contains_key(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &LexiconEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Inserts an entry under the normalized form of `term`.
    pub fn insert(&mut self, term: &str, entry: LexiconEntry) -> Option<String> {
        if entry.count_total == 0 || entry.count_in_biased > entry.count_total {
            return None;
        }
        let key = normalize_term(term)?;
        self.entries.insert(key.clone(), entry);
        Some(key)
    }

    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), LexiconError> {
        for (term, e) in &self.entries {
            writeln!(out, "{term}\t{}\t{}", e.count_in_biased, e.count_total)?;
        }
        Ok(())
    }

    /// Parses the `term<TAB>count_in_biased<TAB>count_total` format.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self, LexiconError> {
        let mut entries = BTreeMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line_no = i + 1;
            if line.is_empty() {
                continue;
            }
            let err = |reason: &str| LexiconError::Parse {
                line: line_no,
                reason: reason.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(term), Some(biased), Some(total), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                return Err(err("expected three tab-separated fields"));
            };
            let count_in_biased: u64 = biased.parse().map_err(|_| err("bad count_in_biased"))?;
            let count_total: u64 = total.parse().map_err(|_| err("bad count_total"))?;
            if count_total == 0 || count_in_biased > count_total {
                return Err(err(
                    "counts must satisfy 0 <= count_in_biased <= count_total, count_total > 0",
                ));
            }
            if normalize_term(term).as_deref() != Some(term) {
                return Err(err("term is not in normalized form"));
            }
            let entry = LexiconEntry {
                count_in_biased,
                count_total,
            };
            if entries.insert(term.to_string(), entry).is_some() {
                return Err(err("duplicate term"));
            }
        }
        Ok(Self { entries })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), LexiconError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

/// Mines the biased-word annotations of `records` into a lexicon.
///
/// A record counts toward a term if it lists the term or its sentence
/// contains it; `count_in_biased` counts those records labeled biased.
pub fn build_lexicon<'a, I>(records: I) -> Lexicon
where
    I: IntoIterator<Item = &'a MbicRecord>,
    I::IntoIter: Clone,
{
    let records = records.into_iter();
    let terms: HashSet<String> = records
        .clone()
        .flat_map(|r| r.biased_words.iter().filter_map(|w| normalize_term(w)))
        .collect();

    let mut entries: BTreeMap<String, LexiconEntry> = BTreeMap::new();
    for record in records {
        let mut present: HashSet<String> = record
            .biased_words
            .iter()
            .filter_map(|w| normalize_term(w))
            .collect();
        let doc = tokenize(&record.sentence);
        present.extend(
            window_keys(&doc)
                .map(|(_, _, key)| key)
                .filter(|key| terms.contains(key)),
        );
        let biased = record.label.is_biased();
        for term in present {
            let e = entries.entry(term).or_insert(LexiconEntry {
                count_in_biased: 0,
                count_total: 0,
            });
            e.count_total += 1;
            if biased {
                e.count_in_biased += 1;
            }
        }
    }
    Lexicon { entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasSpan {
    pub span: Span,
    pub score: f64,
}

/// Anything that locates bias-bearing spans in a tokenized document.
pub trait Recognizer: Send + Sync {
    /// Returned spans are sorted by position and do not overlap.
    fn recognize(&self, document: &Document) -> Vec<BiasSpan>;
}

impl<R: Recognizer + ?Sized> Recognizer for &R {
    fn recognize(&self, document: &Document) -> Vec<BiasSpan> {
        (**self).recognize(document)
    }
}

impl<R: Recognizer + ?Sized> Recognizer for Box<R> {
    fn recognize(&self, document: &Document) -> Vec<BiasSpan> {
        (**self).recognize(document)
    }
}

#[derive(Debug, Clone)]
pub struct LexiconRecognizer {
    pub lexicon: Lexicon,
    pub min_score: f64,
}

impl LexiconRecognizer {
    pub fn new(lexicon: Lexicon) -> Self {
        Self {
            lexicon,
            min_score: 0.0,
        }
    }

    pub fn with_min_score(mut self, min_score: f64) -> Self {
        self.min_score = min_score;
        self
    }
}

impl Recognizer for LexiconRecognizer {
    fn recognize(&self, document: &Document) -> Vec<BiasSpan> {
        recognize(&self.lexicon, document, self.min_score)
    }
}

/// Longest-match lexicon scan; see the module docs for tie-breaking.
pub fn recognize(lexicon: &Lexicon, document: &Document, min_score: f64) -> Vec<BiasSpan> {
    let mut candidates: Vec<(usize, usize, f64)> = window_keys(document)
        .filter_map(|(start, len, key)| {
            let score = lexicon.get(&key)?.score();
            (score >= min_score).then_some((start, len, score))
        })
        .collect();
    candidates.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));

    let mut taken = vec![false; document.tokens.len()];
    let mut chosen = Vec::new();
    for (start, len, score) in candidates {
        if taken[start..start + len].iter().any(|&t| t) {
            continue;
        }
        taken[start..start + len].iter_mut().for_each(|t| *t = true);
        let span = document
            .span(start, start + len - 1)
            .expect("window lies inside the document");
        chosen.push(BiasSpan { span, score });
    }
    chosen.sort_by_key(|s| s.span.first_token);
    chosen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tag {
    B,
    I,
    O,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Tag::B => "B",
            Tag::I => "I",
            Tag::O => "O",
        };
        f.write_str(s)
    }
}

/// Per-token BIO tags; an `I` always continues a `B` or `I`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSequence {
    tags: Vec<Tag>,
}

impl TagSequence {
    pub fn new(tags: Vec<Tag>) -> Result<Self, TagError> {
        for (i, tag) in tags.iter().enumerate() {
            if *tag == Tag::I && (i == 0 || tags[i - 1] == Tag::O) {
                return Err(TagError::DanglingInside(i));
            }
        }
        Ok(Self { tags })
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    /// Inclusive token ranges of the encoded spans.
    pub fn ranges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for (i, tag) in self.tags.iter().enumerate() {
            match tag {
                Tag::B => out.push((i, i)),
                Tag::I => out.last_mut().expect("validated").1 = i,
                Tag::O => {}
            }
        }
        out
    }

    pub fn from_ranges(len: usize, ranges: &[(usize, usize)]) -> Result<Self, TagError> {
        let mut tags = vec![Tag::O; len];
        let mut sorted = ranges.to_vec();
        sorted.sort_unstable();
        for pair in sorted.windows(2) {
            if pair[1].0 <= pair[0].1 {
                return Err(TagError::Text(crate::error::TextError::OverlappingSpans {
                    left: format!("{:?}", pair[0]),
                    right: format!("{:?}", pair[1]),
                }));
            }
        }
        for &(first, last) in &sorted {
            if first > last || last >= len {
                return Err(TagError::Text(crate::error::TextError::InvalidSpan {
                    first,
                    last,
                    tokens: len,
                }));
            }
            tags[first] = Tag::B;
            for t in &mut tags[first + 1..=last] {
                *t = Tag::I;
            }
        }
        Ok(Self { tags })
    }
}

impl fmt::Display for TagSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, tag) in self.tags.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{tag}")?;
        }
        Ok(())
    }
}

pub fn spans_to_bio(document: &Document, spans: &[Span]) -> Result<TagSequence, TagError> {
    for span in spans {
        document.check_span(span)?;
    }
    let ranges: Vec<(usize, usize)> = spans
        .iter()
        .map(|s| (s.first_token, s.last_token))
        .collect();
    TagSequence::from_ranges(document.tokens.len(), &ranges)
}

pub fn bio_to_spans(document: &Document, tags: &TagSequence) -> Result<Vec<Span>, TagError> {
    if tags.len() != document.tokens.len() {
        return Err(TagError::LengthMismatch {
            tags: tags.len(),
            tokens: document.tokens.len(),
        });
    }
    tags.ranges()
        .into_iter()
        .map(|(first, last)| document.span(first, last).map_err(TagError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Label;

    fn record(sentence: &str, label: Label, words: &[&str]) -> MbicRecord {
        MbicRecord {
            sentence: sentence.to_string(),
            label,
            biased_words: words.iter().map(|w| w.to_string()).collect(),
            ..MbicRecord::default()
        }
    }

    fn lexicon_of(terms: &[&str]) -> Lexicon {
        let mut lex = Lexicon::new();
        for t in terms {
            lex.insert(
                t,
                LexiconEntry {
                    count_in_biased: 3,
                    count_total: 4,
                },
            )
            .unwrap();
        }
        lex
    }

    #[test]
    fn empty_corpus_gives_empty_lexicon() {
        assert!(build_lexicon(&Vec::<MbicRecord>::new()).is_empty());
    }

    #[test]
    fn repeated_listing_is_counted() {
        let records = vec![
            record("Pure hype, nothing else.", Label::Biased, &["hype"]),
            record("More hype from the campaign.", Label::Biased, &["hype"]),
        ];
        let lex = build_lexicon(&records);
        assert_eq!(
            lex.get("hype"),
            Some(&LexiconEntry {
                count_in_biased: 2,
                count_total: 2
            })
        );
    }

    #[test]
    fn unlisted_occurrence_counts_toward_total() {
        let records = vec![
            record("Pure hype.", Label::Biased, &["hype"]),
            record("The hype was measured.", Label::NonBiased, &[]),
        ];
        let e = *build_lexicon(&records).get("hype").unwrap();
        assert_eq!((e.count_in_biased, e.count_total), (1, 2));
        assert_eq!(e.score(), 0.5);
    }

    #[test]
    fn phrase_is_preserved() {
        let records = vec![record(
            "Don't buy the pseudo-scientific hype about tornadoes",
            Label::Biased,
            &["Pseudo-scientific hype"],
        )];
        let lex = build_lexicon(&records);
        assert_eq!(lex.len(), 1);
        assert!(lex.contains("pseudo-scientific hype"));
        assert!(!lex.contains("hype"));
    }

    #[test]
    fn normalize_term_rules() {
        assert_eq!(normalize_term("  Hype! ").as_deref(), Some("hype"));
        assert_eq!(normalize_term("a, b"), None);
        assert_eq!(normalize_term("one two three four"), None);
        assert_eq!(normalize_term("..."), None);
        assert_eq!(normalize_term("Don’t"), Some("don't".to_string()));
    }

    #[test]
    fn no_terms_no_spans() {
        let lex = lexicon_of(&["awful"]);
        assert!(recognize(&lex, &tokenize("A calm report."), 0.0).is_empty());
    }

    #[test]
    fn multiword_span_found() {
        let lex = lexicon_of(&["pseudo-scientific hype"]);
        let doc =
            tokenize("Don't buy the pseudo-scientific hype about tornadoes and climate change");
        let spans = recognize(&lex, &doc, 0.0);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].span.surface, "pseudo-scientific hype");
        assert_eq!(
            (spans[0].span.first_token, spans[0].span.last_token),
            (3, 4)
        );
        assert_eq!(spans[0].score, 0.75);
    }

    #[test]
    fn two_mask_headline() {
        let lex = lexicon_of(&["mouthing", "derogatory term"]);
        let doc = tokenize("mouthing an anti-Asian derogatory term");
        let surfaces: Vec<_> = recognize(&lex, &doc, 0.0)
            .into_iter()
            .map(|s| s.span.surface)
            .collect();
        assert_eq!(surfaces, ["mouthing", "derogatory term"]);
    }

    #[test]
    fn longest_match_wins_over_nested() {
        let lex = lexicon_of(&["derogatory term", "term"]);
        let doc = tokenize("a derogatory term");
        let spans = recognize(&lex, &doc, 0.0);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].span.surface, "derogatory term");
    }

    #[test]
    fn leftmost_wins_equal_length_overlap() {
        let lex = lexicon_of(&["very bad", "bad idea"]);
        let spans = recognize(&lex, &tokenize("a very bad idea"), 0.0);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].span.surface, "very bad");
    }

    #[test]
    fn punctuation_breaks_matches_and_case_is_ignored() {
        let lex = lexicon_of(&["bad idea"]);
        assert!(recognize(&lex, &tokenize("bad, idea"), 0.0).is_empty());
        assert_eq!(recognize(&lex, &tokenize("BAD Idea"), 0.0).len(), 1);
    }

    #[test]
    fn min_score_filters() {
        let mut lex = Lexicon::new();
        lex.insert(
            "weak",
            LexiconEntry {
                count_in_biased: 1,
                count_total: 10,
            },
        );
        let doc = tokenize("a weak claim");
        assert_eq!(recognize(&lex, &doc, 0.0).len(), 1);
        assert!(LexiconRecognizer::new(lex)
            .with_min_score(0.5)
            .recognize(&doc)
            .is_empty());
    }

    #[test]
    fn bio_definitional() {
        let doc = tokenize("t0 t1 t2 t3 t4 t5 t6 t7 t8 t9");
        assert_eq!(
            spans_to_bio(&doc, &[]).unwrap().to_string(),
            "O O O O O O O O O O"
        );
        let span = doc.span(4, 5).unwrap();
        let tags = spans_to_bio(&doc, std::slice::from_ref(&span)).unwrap();
        assert_eq!(tags.to_string(), "O O O O B I O O O O");
        assert_eq!(bio_to_spans(&doc, &tags).unwrap(), vec![span]);
    }

    #[test]
    fn bio_rejects_overlap_and_dangling_inside() {
        let doc = tokenize("a b c d");
        let a = doc.span(0, 1).unwrap();
        let b = doc.span(1, 2).unwrap();
        assert!(spans_to_bio(&doc, &[a, b]).is_err());
        assert_eq!(
            TagSequence::new(vec![Tag::O, Tag::I]),
            Err(TagError::DanglingInside(1))
        );
        assert!(TagSequence::new(vec![Tag::I]).is_err());
    }

    #[test]
    fn bio_length_mismatch() {
        let doc = tokenize("a b");
        let tags = TagSequence::new(vec![Tag::O]).unwrap();
        assert!(matches!(
            bio_to_spans(&doc, &tags),
            Err(TagError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn lexicon_file_round_trip_is_sorted() {
        let lex = lexicon_of(&["zeal", "awful", "derogatory term"]);
        let mut buf = Vec::new();
        lex.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text, "awful\t3\t4\nderogatory term\t3\t4\nzeal\t3\t4\n");
        assert_eq!(Lexicon::read_from(buf.as_slice()).unwrap(), lex);
    }

    #[test]
    fn lexicon_reader_rejects_bad_lines() {
        for bad in [
            "x\t2\t1\n",
            "x\t1\n",
            "Upper\t1\t1\n",
            "x\t1\t1\nx\t1\t1\n",
            "x\ta\t1\n",
        ] {
            assert!(Lexicon::read_from(bad.as_bytes()).is_err(), "{bad:?}");
        }
    }
}
