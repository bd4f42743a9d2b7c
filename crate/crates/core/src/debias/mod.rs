//! Masking, mask shifting, infilling and re-scoring.
//!
//! One round is run per sentence: detect, recognize, mask, fill the masks
//! left to right, then score every assembled candidate with the detector.

pub mod infill;
pub mod mask;

use serde::{Deserialize, Serialize};

use crate::detection::Detector;
use crate::error::DebiasError;
use crate::exec::ExecMode;
use crate::recognition::{BiasSpan, Recognizer};
use crate::text::{tokenize, Span};

pub use infill::{suggest_topk, FallbackInfiller, Infiller, NgramInfiller, NEUTRAL_FALLBACK};
pub use mask::{mask_random, mask_spans, shift_decompose, MaskedInstance, MaskedText, MASK_TOKEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DebiasConfig {
    pub top_k: usize,
    pub accept_threshold: f64,
    /// Defaults to `top_k`.
    pub max_candidates_returned: Option<usize>,
    pub exec: ExecMode,
}

impl Default for DebiasConfig {
    fn default() -> Self {
        Self {
            top_k: 5,
            accept_threshold: 0.5,
            max_candidates_returned: None,
            exec: ExecMode::default(),
        }
    }
}

impl DebiasConfig {
    pub fn validate(&self) -> Result<(), DebiasError> {
        if self.top_k == 0 {
            return Err(DebiasError::InvalidConfig(
                "top_k must be at least 1".into(),
            ));
        }
        if !(self.accept_threshold > 0.0 && self.accept_threshold < 1.0) {
            return Err(DebiasError::InvalidConfig(format!(
                "accept_threshold must lie in (0,1), got {}",
                self.accept_threshold
            )));
        }
        if self.max_candidates_returned == Some(0) {
            return Err(DebiasError::InvalidConfig(
                "max_candidates_returned must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn candidate_limit(&self) -> usize {
        self.max_candidates_returned.unwrap_or(self.top_k)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub span: Span,
    pub replacement: String,
}

/// An assembled but not yet scored candidate; `rank` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub rank: usize,
    pub text: String,
    pub fills: Vec<Fill>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub rank: usize,
    pub text: String,
    pub fills: Vec<Fill>,
    pub probability: f64,
    pub accepted: bool,
}

/// Candidate `j` pairs the rank-`j` suggestion of every span, each list's
/// rank clamped to its length. Yields `min(top_k, longest list)` drafts.
pub fn assemble_candidates<S: AsRef<str>>(
    masked: &MaskedText,
    suggestions: &[Vec<S>],
    config: &DebiasConfig,
) -> Result<Vec<Draft>, DebiasError> {
    if suggestions.len() != masked.mask_count() {
        return Err(DebiasError::SuggestionMismatch(format!(
            "{} suggestion lists for {} spans",
            suggestions.len(),
            masked.mask_count()
        )));
    }
    if let Some(i) = suggestions.iter().position(Vec::is_empty) {
        return Err(DebiasError::SuggestionMismatch(format!(
            "suggestion list {i} is empty"
        )));
    }
    let longest = suggestions.iter().map(Vec::len).max().unwrap_or(0);
    let count = config.top_k.min(longest);
    let mut drafts = Vec::with_capacity(count);
    for j in 0..count {
        let words: Vec<&str> = suggestions
            .iter()
            .map(|list| list[j.min(list.len() - 1)].as_ref())
            .collect();
        let text = masked.fill(&words)?;
        let fills = masked
            .masked_spans
            .iter()
            .zip(&words)
            .map(|(span, w)| Fill {
                span: span.clone(),
                replacement: w.to_string(),
            })
            .collect();
        drafts.push(Draft {
            rank: j + 1,
            text,
            fills,
        });
    }
    Ok(drafts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DebiasStatus {
    NotBiased,
    Debiased,
    NoAcceptableCandidate,
    UnlocatableBias,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasResult {
    pub original: String,
    pub original_probability: f64,
    pub status: DebiasStatus,
    pub spans: Vec<BiasSpan>,
    /// Ascending by probability, ties by rank.
    pub candidates: Vec<Candidate>,
    pub chosen: Option<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanRecord {
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub text: String,
    pub probability: f64,
    pub accepted: bool,
}

/// Flat, serializable view of a [`DebiasResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DebiasRecord {
    pub original: String,
    pub original_probability: f64,
    pub status: DebiasStatus,
    pub spans: Vec<SpanRecord>,
    pub candidates: Vec<CandidateRecord>,
    pub chosen: Option<String>,
}

impl DebiasResult {
    /// The chosen text, or the original when nothing was chosen.
    pub fn output_text(&self) -> &str {
        self.chosen.as_ref().map_or(&self.original, |c| &c.text)
    }

    /// Probability of [`Self::output_text`].
    pub fn output_probability(&self) -> f64 {
        self.chosen
            .as_ref()
            .map_or(self.original_probability, |c| c.probability)
    }

    pub fn to_record(&self) -> DebiasRecord {
        let doc = tokenize(&self.original);
        DebiasRecord {
            original: self.original.clone(),
            original_probability: self.original_probability,
            status: self.status,
            spans: self
                .spans
                .iter()
                .map(|s| {
                    let (start, end) = doc.span_range(&s.span);
                    SpanRecord {
                        start,
                        end,
                        surface: s.span.surface.clone(),
                    }
                })
                .collect(),
            candidates: self
                .candidates
                .iter()
                .map(|c| CandidateRecord {
                    text: c.text.clone(),
                    probability: c.probability,
                    accepted: c.accepted,
                })
                .collect(),
            chosen: self.chosen.as_ref().map(|c| c.text.clone()),
        }
    }
}

/// Suggestions per span, filling masks left to right. Each later instance
/// sees the rank-1 fills of the spans before it.
pub fn suggest_all<F: Infiller + ?Sized>(
    infiller: &F,
    masked: &MaskedText,
    top_k: usize,
) -> Vec<Vec<String>> {
    let mut committed: Vec<(Span, String)> = Vec::with_capacity(masked.mask_count());
    let mut all = Vec::with_capacity(masked.mask_count());
    for (i, span) in masked.masked_spans.iter().enumerate() {
        let instance = masked.instance(i, &committed);
        let words = suggest_topk(infiller, &instance, top_k);
        committed.push((span.clone(), words[0].clone()));
        all.push(words);
    }
    all
}

/// Fills, scores and ranks candidates for an already masked text.
///
/// Returns every scored candidate (truncated to the configured limit) and
/// the chosen one, if any candidate passes the acceptance rule.
pub fn debias_masked<D, F>(
    detector: &D,
    infiller: &F,
    masked: &MaskedText,
    original_probability: f64,
    config: &DebiasConfig,
) -> Result<(Vec<Candidate>, Option<Candidate>), DebiasError>
where
    D: Detector + ?Sized,
    F: Infiller + ?Sized,
{
    config.validate()?;
    if masked.mask_count() == 0 {
        return Ok((Vec::new(), None));
    }
    let suggestions = suggest_all(infiller, masked, config.top_k);
    let drafts = assemble_candidates(masked, &suggestions, config)?;
    let probabilities = config
        .exec
        .map(&drafts, |d| detector.predict_proba(&d.text));
    let mut candidates: Vec<Candidate> = drafts
        .into_iter()
        .zip(probabilities)
        .map(|(d, probability)| Candidate {
            rank: d.rank,
            text: d.text,
            fills: d.fills,
            probability,
            accepted: probability < config.accept_threshold || probability < original_probability,
        })
        .collect();
    candidates.sort_by(|a, b| {
        a.probability
            .total_cmp(&b.probability)
            .then(a.rank.cmp(&b.rank))
    });
    candidates.truncate(config.candidate_limit());
    let chosen = candidates.first().filter(|c| c.accepted).cloned();
    Ok((candidates, chosen))
}

/// One detect, recognize, infill and re-score round on `text`.
pub fn debias<D, R, F>(
    detector: &D,
    recognizer: &R,
    infiller: &F,
    text: &str,
    config: &DebiasConfig,
) -> Result<DebiasResult, DebiasError>
where
    D: Detector + ?Sized,
    R: Recognizer + ?Sized,
    F: Infiller + ?Sized,
{
    config.validate()?;
    if text.trim().is_empty() {
        return Err(DebiasError::EmptyInput);
    }
    let detection = detector.classify(text);
    let original_probability = detection.probability;
    if !detection.label.is_biased() {
        let unchanged = Candidate {
            rank: 0,
            text: text.to_string(),
            fills: Vec::new(),
            probability: original_probability,
            accepted: true,
        };
        return Ok(DebiasResult {
            original: text.to_string(),
            original_probability,
            status: DebiasStatus::NotBiased,
            spans: Vec::new(),
            candidates: Vec::new(),
            chosen: Some(unchanged),
        });
    }
    let document = tokenize(text);
    let spans = recognizer.recognize(&document);
    if spans.is_empty() {
        return Ok(DebiasResult {
            original: text.to_string(),
            original_probability,
            status: DebiasStatus::UnlocatableBias,
            spans,
            candidates: Vec::new(),
            chosen: None,
        });
    }
    let plain: Vec<Span> = spans.iter().map(|s| s.span.clone()).collect();
    let masked = mask_spans(&document, &plain)?;
    let (candidates, chosen) =
        debias_masked(detector, infiller, &masked, original_probability, config)?;
    let status = if chosen.is_some() {
        DebiasStatus::Debiased
    } else {
        DebiasStatus::NoAcceptableCandidate
    };
    Ok(DebiasResult {
        original: text.to_string(),
        original_probability,
        status,
        spans,
        candidates,
        chosen,
    })
}
