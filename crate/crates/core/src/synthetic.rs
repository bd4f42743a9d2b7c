//! Template corpus with a planted biased lexicon.
//!
//! Every sentence names one identity group and fills the same slots with
//! either a planted biased word or a neutral one. A sentence is labeled
//! biased exactly when it carries a planted word, and unprivileged groups
//! receive planted words at a higher rate than privileged ones.
//!
//! Optionally, a share of sentences in every group carries an unannotated
//! biased adverb: labeled biased, but absent from `biased_words`, so a
//! lexicon mined from the annotations cannot locate it.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::MbicRecord;
use crate::detection::Label;

pub const PLANTED_ADJECTIVES: [&str; 8] = [
    "disgraceful",
    "radical",
    "hysterical",
    "shameful",
    "outrageous",
    "corrupt",
    "lazy",
    "dangerous",
];
pub const PLANTED_ADVERBS: [&str; 3] = ["shamelessly", "recklessly", "arrogantly"];
pub const UNANNOTATED_ADVERB: &str = "notoriously";

const NEUTRAL_ADJECTIVES: [&str; 8] = [
    "new", "recent", "detailed", "annual", "official", "public", "local", "formal",
];
const NEUTRAL_ADVERBS: [&str; 3] = ["formally", "publicly", "quickly"];
const VERBS: [&str; 6] = [
    "discussed",
    "reviewed",
    "announced",
    "supported",
    "questioned",
    "described",
];
const NOUNS: [&str; 7] = [
    "plan",
    "proposal",
    "report",
    "policy",
    "budget",
    "statement",
    "measure",
];
const TAILS: [&str; 5] = [
    "on Monday",
    "this week",
    "in the city",
    "during the hearing",
    "after the vote",
];
/// (subject, privileged)
const SUBJECTS: [(&str, bool); 6] = [
    ("Women", false),
    ("Men", true),
    ("Immigrants", false),
    ("Citizens", true),
    ("Seniors", false),
    ("Students", true),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub sentences: usize,
    pub seed: u64,
    /// Sentences per article.
    pub article_size: usize,
    pub unprivileged_rate: f64,
    pub privileged_rate: f64,
    /// Chance that a sentence also fills the adverb slot.
    pub adverb_rate: f64,
    /// Chance, equal across groups, of an unannotated biased adverb.
    pub unannotated_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            sentences: 500,
            seed: 7,
            article_size: 5,
            unprivileged_rate: 0.6,
            privileged_rate: 0.3,
            adverb_rate: 0.25,
            unannotated_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<MbicRecord>,
    pub article_size: usize,
}

impl SyntheticCorpus {
    /// Consecutive sentences joined into articles.
    pub fn articles(&self) -> Vec<String> {
        self.records
            .chunks(self.article_size.max(1))
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|r| r.sentence.as_str())
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect()
    }

    pub fn sentences(&self) -> Vec<String> {
        self.records.iter().map(|r| r.sentence.clone()).collect()
    }
}

pub fn is_planted(word: &str) -> bool {
    let w = word.to_lowercase();
    PLANTED_ADJECTIVES.contains(&w.as_str()) || PLANTED_ADVERBS.contains(&w.as_str())
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut records = Vec::with_capacity(config.sentences);
    for i in 0..config.sentences {
        let (subject, privileged) = SUBJECTS[i % SUBJECTS.len()];
        let rate = if privileged {
            config.privileged_rate
        } else {
            config.unprivileged_rate
        };
        let planted = rng.random_bool(rate);
        let unannotated = rng.random_bool(config.unannotated_rate);
        let with_adverb = rng.random_bool(config.adverb_rate);
        let pick =
            |rng: &mut ChaCha8Rng, words: &[&'static str]| *words.choose(rng).expect("non-empty");
        let adjective = if planted {
            pick(&mut rng, &PLANTED_ADJECTIVES)
        } else {
            pick(&mut rng, &NEUTRAL_ADJECTIVES)
        };
        let adverb = with_adverb.then(|| {
            if planted {
                pick(&mut rng, &PLANTED_ADVERBS)
            } else {
                pick(&mut rng, &NEUTRAL_ADVERBS)
            }
        });
        let verb = pick(&mut rng, &VERBS);
        let noun = pick(&mut rng, &NOUNS);
        let tail = pick(&mut rng, &TAILS);
        let sentence = match unannotated.then_some(UNANNOTATED_ADVERB).or(adverb) {
            Some(adv) => format!("{subject} {adv} {verb} the {adjective} {noun} {tail}."),
            None => format!("{subject} {verb} the {adjective} {noun} {tail}."),
        };
        let biased_words = if planted {
            std::iter::once(adjective)
                .chain(adverb.filter(|_| !unannotated))
                .map(String::from)
                .collect()
        } else {
            Vec::new()
        };
        records.push(MbicRecord {
            sentence,
            outlet: "synthetic".into(),
            topic: "civic".into(),
            biased_words,
            label: Label::from_positive(planted || unannotated),
            ..MbicRecord::default()
        });
    }
    SyntheticCorpus {
        records,
        article_size: config.article_size,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_follow_planted_words() {
        let corpus = generate(&SyntheticConfig::default());
        assert_eq!(corpus.records.len(), 500);
        for r in &corpus.records {
            let has_planted = r
                .sentence
                .split(|c: char| !c.is_alphanumeric())
                .any(is_planted);
            assert_eq!(has_planted, r.label.is_biased(), "{}", r.sentence);
            assert_eq!(r.biased_words.is_empty(), !r.label.is_biased());
        }
        assert_eq!(corpus.articles().len(), 100);
    }

    #[test]
    fn unannotated_adverb_is_biased_but_unlisted() {
        let corpus = generate(&SyntheticConfig {
            unannotated_rate: 0.5,
            ..SyntheticConfig::default()
        });
        let marked: Vec<_> = corpus
            .records
            .iter()
            .filter(|r| r.sentence.contains(UNANNOTATED_ADVERB))
            .collect();
        assert!(!marked.is_empty());
        for r in marked {
            assert!(r.label.is_biased());
            assert!(!r.biased_words.iter().any(|w| w == UNANNOTATED_ADVERB));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate(&SyntheticConfig::default());
        let b = generate(&SyntheticConfig::default());
        assert_eq!(a, b);
        let c = generate(&SyntheticConfig {
            seed: 8,
            ..SyntheticConfig::default()
        });
        assert_ne!(a, c);
    }
}
