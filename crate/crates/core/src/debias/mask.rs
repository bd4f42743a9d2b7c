use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{DebiasError, TextError};
use crate::text::{Document, Span};

pub const MASK_TOKEN: &str = "[MASK]";

/// A document with every masked span rendered as a single `[MASK]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedText {
    pub original: Document,
    /// Sorted by position, non-overlapping.
    pub masked_spans: Vec<Span>,
    pub rendering: String,
}

/// One mask at a time: span `target_index` is masked, every other masked
/// span shows its original surface (or a fill committed earlier).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskedInstance {
    pub text: String,
    pub target_span: Span,
    pub target_index: usize,
    /// Character offset of `[MASK]` in `text`.
    pub mask_start: usize,
}

impl MaskedInstance {
    pub fn left_context(&self) -> &str {
        let byte = self
            .text
            .char_indices()
            .nth(self.mask_start)
            .map_or(self.text.len(), |(b, _)| b);
        &self.text[..byte]
    }

    pub fn right_context(&self) -> &str {
        let left = self.left_context().len();
        &self.text[left + MASK_TOKEN.len()..]
    }
}

/// Renders `doc` with each listed span replaced; returns the text and the
/// character offset at which each replacement starts.
fn render(doc: &Document, replacements: &[(&Span, &str)]) -> (String, Vec<usize>) {
    let mut out = String::with_capacity(doc.raw_text.len());
    let mut out_chars = 0;
    let mut starts = Vec::with_capacity(replacements.len());
    let mut cursor = 0;
    for (span, text) in replacements {
        let (start, end) = doc.span_range(span);
        let kept = doc.slice(cursor, start);
        out.push_str(kept);
        out_chars += kept.chars().count();
        starts.push(out_chars);
        out.push_str(text);
        out_chars += text.chars().count();
        cursor = end;
    }
    out.push_str(doc.slice(cursor, doc.char_len()));
    (out, starts)
}

fn sorted_checked(doc: &Document, spans: &[Span]) -> Result<Vec<Span>, TextError> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    for s in &sorted {
        doc.check_span(s)?;
    }
    for pair in sorted.windows(2) {
        if pair[0].overlaps(&pair[1]) {
            return Err(TextError::OverlappingSpans {
                left: pair[0].surface.clone(),
                right: pair[1].surface.clone(),
            });
        }
    }
    Ok(sorted)
}

/// Replaces each span, multi-word or not, by exactly one `[MASK]`.
pub fn mask_spans(document: &Document, spans: &[Span]) -> Result<MaskedText, DebiasError> {
    let masked_spans = sorted_checked(document, spans)?;
    let pairs: Vec<(&Span, &str)> = masked_spans.iter().map(|s| (s, MASK_TOKEN)).collect();
    let (rendering, _) = render(document, &pairs);
    Ok(MaskedText {
        original: document.clone(),
        masked_spans,
        rendering,
    })
}

impl MaskedText {
    pub fn mask_count(&self) -> usize {
        self.masked_spans.len()
    }

    /// Instance masking span `index`. Spans listed in `committed` show their
    /// fill instead of the original surface.
    pub fn instance(&self, index: usize, committed: &[(Span, String)]) -> MaskedInstance {
        let pairs: Vec<(&Span, &str)> = self
            .masked_spans
            .iter()
            .enumerate()
            .filter_map(|(i, span)| {
                if i == index {
                    Some((span, MASK_TOKEN))
                } else {
                    committed
                        .iter()
                        .find(|(s, _)| s == span)
                        .map(|(_, fill)| (span, fill.as_str()))
                }
            })
            .collect();
        let (text, starts) = render(&self.original, &pairs);
        let target = &self.masked_spans[index];
        let mask_pos = pairs
            .iter()
            .position(|(s, _)| *s == target)
            .expect("target span is always rendered");
        MaskedInstance {
            text,
            target_span: self.masked_spans[index].clone(),
            target_index: index,
            mask_start: starts[mask_pos],
        }
    }

    /// Renders the original with the given per-span fills.
    pub fn fill(&self, fills: &[&str]) -> Result<String, DebiasError> {
        if fills.len() != self.masked_spans.len() {
            return Err(DebiasError::SuggestionMismatch(format!(
                "{} fills for {} spans",
                fills.len(),
                self.masked_spans.len()
            )));
        }
        let pairs: Vec<(&Span, &str)> = self
            .masked_spans
            .iter()
            .zip(fills.iter().copied())
            .collect();
        Ok(render(&self.original, &pairs).0)
    }
}

/// Splits a multi-mask text into one instance per span, in span order.
pub fn shift_decompose(masked: &MaskedText) -> Vec<MaskedInstance> {
    (0..masked.mask_count())
        .map(|i| masked.instance(i, &[]))
        .collect()
}

/// Random masking for the masking-probability ablation.
///
/// A uniformly chosen subset of `ceil(fraction * tokens)` tokens is drawn,
/// then each is masked independently with probability `p`.
pub fn mask_random(
    document: &Document,
    fraction: f64,
    p: f64,
    seed: u64,
) -> Result<MaskedText, DebiasError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DebiasError::InvalidConfig(format!(
            "fraction must lie in (0,1], got {fraction}"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(DebiasError::InvalidConfig(format!(
            "p must lie in [0,1], got {p}"
        )));
    }
    let n = document.tokens.len();
    if n == 0 {
        return mask_spans(document, &[]);
    }
    let subset_size = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = sample(&mut rng, n, subset_size).into_vec();
    chosen.sort_unstable();
    let spans: Vec<Span> = chosen
        .into_iter()
        .filter(|_| rng.random_bool(p))
        .map(|i| document.span(i, i).expect("sampled index is in range"))
        .collect();
    mask_spans(document, &spans)
}
