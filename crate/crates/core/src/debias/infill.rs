use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mask::MaskedInstance;
use crate::error::DatasetError;
use crate::text::{normalize, tokenize, Token};

/// Used when an infiller has nothing to offer for a context.
pub const NEUTRAL_FALLBACK: [&str; 5] = ["information", "statement", "report", "people", "group"];

const SENTENCE_START: &str = "<s>";
const SENTENCE_END: &str = "</s>";

/// Proposes single-word replacements for the `[MASK]` of an instance.
pub trait Infiller: Send + Sync {
    /// At most `k` words, best first.
    fn suggest(&self, instance: &MaskedInstance, k: usize) -> Vec<String>;
}

impl<F: Infiller + ?Sized> Infiller for &F {
    fn suggest(&self, instance: &MaskedInstance, k: usize) -> Vec<String> {
        (**self).suggest(instance, k)
    }
}

impl<F: Infiller + ?Sized> Infiller for Box<F> {
    fn suggest(&self, instance: &MaskedInstance, k: usize) -> Vec<String> {
        (**self).suggest(instance, k)
    }
}

/// Offers nothing, so every suggestion comes from [`NEUTRAL_FALLBACK`].
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackInfiller;

impl Infiller for FallbackInfiller {
    fn suggest(&self, _: &MaskedInstance, _: usize) -> Vec<String> {
        Vec::new()
    }
}

/// Up to `k` suggestions, never the masked surface itself, never empty.
pub fn suggest_topk<F: Infiller + ?Sized>(
    infiller: &F,
    instance: &MaskedInstance,
    k: usize,
) -> Vec<String> {
    let k = k.max(1);
    let original = normalize(&instance.target_span.surface);
    let mut seen = HashSet::new();
    let mut keep = |w: &str| {
        let n = normalize(w);
        !w.trim().is_empty() && n != original && seen.insert(n)
    };
    let mut out: Vec<String> = infiller
        .suggest(instance, k + 1)
        .into_iter()
        .filter(|w| keep(w))
        .take(k)
        .collect();
    if out.is_empty() {
        out = NEUTRAL_FALLBACK
            .iter()
            .filter(|w| keep(w))
            .take(k)
            .map(|w| w.to_string())
            .collect();
    }
    out
}

/// Bidirectional bigram suggester.
///
/// A vocabulary word `w` is scored against the token left of the mask `L`
/// and right of it `R`: words seen in both `L w` and `w R` outrank words
/// seen on one side only, then `(c(L,w) + 1) * (c(w,R) + 1)` decides, then
/// overall frequency, then spelling.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NgramInfiller {
    /// left token → word → count of `left word`
    followers: BTreeMap<String, BTreeMap<String, u64>>,
    /// right token → word → count of `word right`
    preceders: BTreeMap<String, BTreeMap<String, u64>>,
    unigrams: BTreeMap<String, u64>,
    #[serde(default)]
    blocked: BTreeSet<String>,
}

fn context_key(token: Option<&Token>, boundary: &str) -> String {
    token.map_or_else(|| boundary.to_string(), |t| normalize(&t.surface))
}

impl NgramInfiller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn train<S: AsRef<str>>(sentences: &[S]) -> Self {
        let mut model = Self::new();
        for s in sentences {
            model.observe(s.as_ref());
        }
        model
    }

    pub fn observe(&mut self, sentence: &str) {
        let doc = tokenize(sentence);
        for (i, tok) in doc.tokens.iter().enumerate() {
            if !tok.is_word() {
                continue;
            }
            let word = normalize(&tok.surface);
            let left = context_key(i.checked_sub(1).map(|j| &doc.tokens[j]), SENTENCE_START);
            let right = context_key(doc.tokens.get(i + 1), SENTENCE_END);
            *self
                .followers
                .entry(left)
                .or_default()
                .entry(word.clone())
                .or_insert(0) += 1;
            *self
                .preceders
                .entry(right)
                .or_default()
                .entry(word.clone())
                .or_insert(0) += 1;
            *self.unigrams.entry(word).or_insert(0) += 1;
        }
    }

    /// Words that are never suggested (normalized before comparison).
    pub fn with_blocked<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.blocked
            .extend(words.into_iter().map(|w| normalize(w.as_ref())));
        self
    }

    pub fn vocabulary_size(&self) -> usize {
        self.unigrams.len()
    }

    /// Ranked words for the gap between `left` and `right` context tokens.
    pub fn rank(&self, left: &str, right: &str, k: usize) -> Vec<String> {
        let empty = BTreeMap::new();
        let after_left = self.followers.get(left).unwrap_or(&empty);
        let before_right = self.preceders.get(right).unwrap_or(&empty);
        let words: BTreeSet<&String> = after_left.keys().chain(before_right.keys()).collect();
        let mut scored: Vec<(u8, u64, u64, &String)> = words
            .into_iter()
            .filter(|w| !self.blocked.contains(*w))
            .map(|w| {
                let l = after_left.get(w).copied().unwrap_or(0);
                let r = before_right.get(w).copied().unwrap_or(0);
                let sides = u8::from(l > 0) + u8::from(r > 0);
                let freq = self.unigrams.get(w).copied().unwrap_or(0);
                (sides, (l + 1) * (r + 1), freq, w)
            })
            .collect();
        scored.sort_by(|a, b| {
            b.0.cmp(&a.0)
                .then(b.1.cmp(&a.1))
                .then(b.2.cmp(&a.2))
                .then(a.3.cmp(b.3))
        });
        scored.into_iter().take(k).map(|s| s.3.clone()).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DatasetError> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut out, self)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DatasetError> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

impl Infiller for NgramInfiller {
    fn suggest(&self, instance: &MaskedInstance, k: usize) -> Vec<String> {
        let left = tokenize(instance.left_context());
        let right = tokenize(instance.right_context());
        let left_key = context_key(left.tokens.last(), SENTENCE_START);
        let right_key = context_key(right.tokens.first(), SENTENCE_END);
        self.rank(&left_key, &right_key, k)
    }
}
