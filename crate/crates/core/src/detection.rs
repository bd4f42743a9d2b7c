//! Biased / non-biased sentence classification.
//!
//! The built-in detector is logistic regression over hashed, lowercased token
//! n-gram counts, trained by full-batch gradient descent on mean binary
//! cross-entropy with an L2 penalty. Anything implementing [`Detector`] can
//! replace it in the pipeline.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::DetectionError;
use crate::exec::ExecMode;
use crate::text::{normalize, tokenize};

pub const DEFAULT_HASH_DIMENSION: usize = 1 << 18;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

const MODEL_MAGIC: &[u8; 4] = b"DBDM";
const MODEL_VERSION: u32 = 1;
/// Logits are clamped so the sigmoid never rounds to exactly 0 or 1.
const LOGIT_LIMIT: f64 = 36.0;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Biased,
    #[default]
    NonBiased,
}

impl Label {
    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Biased
        } else {
            Label::NonBiased
        }
    }

    pub fn is_biased(self) -> bool {
        self == Label::Biased
    }

    pub fn as_f64(self) -> f64 {
        if self.is_biased() {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub label: Label,
    /// Probability of the `Biased` class.
    pub probability: f64,
}

/// Anything that scores text with a probability of being biased.
pub trait Detector: Send + Sync {
    fn predict_proba(&self, text: &str) -> f64;

    fn threshold(&self) -> f64 {
        DEFAULT_THRESHOLD
    }

    /// Ties at the threshold classify as biased.
    fn classify(&self, text: &str) -> DetectionResult {
        let probability = self.predict_proba(text);
        DetectionResult {
            label: Label::from_positive(probability >= self.threshold()),
            probability,
        }
    }

    fn classify_batch(&self, texts: &[String], mode: ExecMode) -> Vec<DetectionResult>
    where
        Self: Sized,
    {
        mode.map(texts, |t| self.classify(t))
    }
}

impl<D: Detector + ?Sized> Detector for &D {
    fn predict_proba(&self, text: &str) -> f64 {
        (**self).predict_proba(text)
    }

    fn threshold(&self) -> f64 {
        (**self).threshold()
    }
}

impl<D: Detector + ?Sized> Detector for Box<D> {
    fn predict_proba(&self, text: &str) -> f64 {
        (**self).predict_proba(text)
    }

    fn threshold(&self) -> f64 {
        (**self).threshold()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub hash_dimension: usize,
    pub ngram_orders: Vec<usize>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            hash_dimension: DEFAULT_HASH_DIMENSION,
            ngram_orders: vec![1, 2],
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), DetectionError> {
        if self.hash_dimension == 0 || self.hash_dimension > u32::MAX as usize {
            return Err(DetectionError::InvalidConfig(format!(
                "hash_dimension must be in 1..=2^32-1, got {}",
                self.hash_dimension
            )));
        }
        if self.ngram_orders.is_empty() || self.ngram_orders.contains(&0) {
            return Err(DetectionError::InvalidConfig(
                "ngram_orders must be a non-empty set of positive integers".into(),
            ));
        }
        Ok(())
    }
}

/// Sparse feature counts, sorted by bucket index with no duplicates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .map(|&(i, v)| dense[i as usize] * v)
            .sum()
    }

    /// Dense copy, mostly useful for tests.
    pub fn to_dense(&self, dimension: usize) -> Vec<f64> {
        let mut out = vec![0.0; dimension];
        for &(i, v) in &self.entries {
            out[i as usize] = v;
        }
        out
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Bucket of a single n-gram (tokens joined by one space).
pub fn feature_bucket(config: &FeatureConfig, ngram: &str) -> u32 {
    (fnv1a(ngram.as_bytes()) % config.hash_dimension as u64) as u32
}

/// Hashed n-gram counts of the lowercased tokens of `text`.
pub fn featurize(config: &FeatureConfig, text: &str) -> SparseVector {
    let tokens: Vec<String> = tokenize(text)
        .tokens
        .iter()
        .map(|t| normalize(&t.surface))
        .collect();
    let mut buckets: Vec<u32> = Vec::new();
    let mut gram = String::new();
    for &order in &config.ngram_orders {
        if order == 0 || order > tokens.len() {
            continue;
        }
        for window in tokens.windows(order) {
            gram.clear();
            for (k, tok) in window.iter().enumerate() {
                if k > 0 {
                    gram.push(' ');
                }
                gram.push_str(tok);
            }
            buckets.push(feature_bucket(config, &gram));
        }
    }
    buckets.sort_unstable();
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for b in buckets {
        match entries.last_mut() {
            Some((last, count)) if *last == b => *count += 1.0,
            _ => entries.push((b, 1.0)),
        }
    }
    SparseVector { entries }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Training is full-batch from zero weights, so the seed does not change
    /// the result; it is kept so runs are described completely.
    pub seed: u64,
    pub features: FeatureConfig,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 0.5,
            l2: 1e-6,
            seed: 0,
            features: FeatureConfig::default(),
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DetectionError> {
        self.features.validate()?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(DetectionError::InvalidConfig(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(DetectionError::InvalidConfig(
                "l2 must be non-negative".into(),
            ));
        }
        check_threshold(self.threshold)
    }
}

fn check_threshold(threshold: f64) -> Result<(), DetectionError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(DetectionError::InvalidConfig(format!(
            "threshold must lie in (0,1), got {threshold}"
        )))
    }
}

/// Hashed n-gram logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorModel {
    pub features: FeatureConfig,
    pub weights: Vec<f64>,
    pub bias_term: f64,
    pub threshold: f64,
}

pub fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-LOGIT_LIMIT, LOGIT_LIMIT);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl DetectorModel {
    /// All-zero model: predicts 0.5 everywhere.
    pub fn zeros(features: FeatureConfig, threshold: f64) -> Result<Self, DetectionError> {
        features.validate()?;
        check_threshold(threshold)?;
        Ok(Self {
            weights: vec![0.0; features.hash_dimension],
            features,
            bias_term: 0.0,
            threshold,
        })
    }

    pub fn validate(&self) -> Result<(), DetectionError> {
        self.features.validate()?;
        check_threshold(self.threshold)?;
        if self.weights.len() != self.features.hash_dimension {
            return Err(DetectionError::InvalidConfig(format!(
                "{} weights for hash_dimension {}",
                self.weights.len(),
                self.features.hash_dimension
            )));
        }
        if !self.bias_term.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(DetectionError::InvalidConfig("non-finite weights".into()));
        }
        Ok(())
    }

    pub fn featurize(&self, text: &str) -> SparseVector {
        featurize(&self.features, text)
    }

    pub fn logit(&self, features: &SparseVector) -> f64 {
        features.dot(&self.weights) + self.bias_term
    }

    pub fn predict_features(&self, features: &SparseVector) -> f64 {
        sigmoid(self.logit(features))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DetectionError> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectionError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    /// Little-endian layout: magic, version, hash_dimension (u64), order
    /// count (u32) and orders (u32 each), threshold, weights, bias term.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<(), DetectionError> {
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        out.write_all(&(self.features.hash_dimension as u64).to_le_bytes())?;
        out.write_all(&(self.features.ngram_orders.len() as u32).to_le_bytes())?;
        for &order in &self.features.ngram_orders {
            out.write_all(&(order as u32).to_le_bytes())?;
        }
        out.write_all(&self.threshold.to_le_bytes())?;
        for w in &self.weights {
            out.write_all(&w.to_le_bytes())?;
        }
        out.write_all(&self.bias_term.to_le_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R) -> Result<Self, DetectionError> {
        let mut magic = [0u8; 4];
        read_exact(input, &mut magic, "magic")?;
        if &magic != MODEL_MAGIC {
            return Err(DetectionError::BadMagic);
        }
        let version = read_u32(input, "version")?;
        if version != MODEL_VERSION {
            return Err(DetectionError::UnsupportedVersion(version));
        }
        let dimension = read_u64(input, "hash_dimension")?;
        if dimension == 0 || dimension > u64::from(u32::MAX) {
            return Err(DetectionError::Corrupt(format!(
                "hash_dimension {dimension}"
            )));
        }
        let order_count = read_u32(input, "ngram order count")?;
        if order_count > 16 {
            return Err(DetectionError::Corrupt(format!(
                "{order_count} ngram orders"
            )));
        }
        let ngram_orders = (0..order_count)
            .map(|_| read_u32(input, "ngram order").map(|o| o as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let threshold = read_f64(input, "threshold")?;
        let weights = (0..dimension)
            .map(|_| read_f64(input, "weights"))
            .collect::<Result<Vec<_>, _>>()?;
        let bias_term = read_f64(input, "bias term")?;
        let mut rest = [0u8; 1];
        if input.read(&mut rest)? != 0 {
            return Err(DetectionError::Corrupt("trailing bytes".into()));
        }
        let model = Self {
            features: FeatureConfig {
                hash_dimension: dimension as usize,
                ngram_orders,
            },
            weights,
            bias_term,
            threshold,
        };
        model
            .validate()
            .map_err(|e| DetectionError::Corrupt(e.to_string()))?;
        Ok(model)
    }
}

fn read_exact<R: Read>(input: &mut R, buf: &mut [u8], what: &str) -> Result<(), DetectionError> {
    input.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            DetectionError::Corrupt(format!("truncated while reading {what}"))
        } else {
            DetectionError::Io(e)
        }
    })
}

fn read_u32<R: Read>(input: &mut R, what: &str) -> Result<u32, DetectionError> {
    let mut b = [0u8; 4];
    read_exact(input, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(input: &mut R, what: &str) -> Result<u64, DetectionError> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(input: &mut R, what: &str) -> Result<f64, DetectionError> {
    let mut b = [0u8; 8];
    read_exact(input, &mut b, what)?;
    Ok(f64::from_le_bytes(b))
}

impl Detector for DetectorModel {
    fn predict_proba(&self, text: &str) -> f64 {
        self.predict_features(&self.featurize(text))
    }

    fn threshold(&self) -> f64 {
        self.threshold
    }
}

/// A featurized training example with label 0.0 or 1.0.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: SparseVector,
    pub label: f64,
}

/// Regularized mean BCE and its gradient at the model's current parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub weight_gradient: Vec<f64>,
    pub bias_gradient: f64,
}

/// `L = mean(softplus(z) - y*z) + l2 * ||w||^2`, where `z = w.x + b`.
///
/// The bias term is not regularized.
pub fn objective(model: &DetectorModel, examples: &[Example], l2: f64) -> Objective {
    let mut weight_gradient = vec![0.0; model.weights.len()];
    let mut bias_gradient = 0.0;
    let mut data_loss = 0.0;
    let n = examples.len().max(1) as f64;
    for ex in examples {
        // unclamped logit keeps the loss smooth for the gradient check
        let z = ex.features.dot(&model.weights) + model.bias_term;
        data_loss += softplus(z) - ex.label * z;
        let residual = (sigmoid_unclamped(z) - ex.label) / n;
        for &(i, v) in &ex.features.entries {
            weight_gradient[i as usize] += residual * v;
        }
        bias_gradient += residual;
    }
    let mut penalty = 0.0;
    for (g, w) in weight_gradient.iter_mut().zip(&model.weights) {
        penalty += w * w;
        *g += 2.0 * l2 * w;
    }
    Objective {
        loss: data_loss / n + l2 * penalty,
        weight_gradient,
        bias_gradient,
    }
}

fn sigmoid_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedDetector {
    pub model: DetectorModel,
    /// Objective value at the start of each epoch, then once more after the
    /// final update (so `epochs + 1` entries).
    pub losses: Vec<f64>,
}

impl TrainedDetector {
    pub fn initial_loss(&self) -> f64 {
        self.losses[0]
    }

    pub fn final_loss(&self) -> f64 {
        *self.losses.last().expect("losses always has an entry")
    }
}

/// Full-batch gradient descent from zero weights.
pub fn train_detector<S: AsRef<str> + Sync>(
    records: &[(S, Label)],
    config: &TrainConfig,
) -> Result<TrainedDetector, DetectionError> {
    config.validate()?;
    let positives = records.iter().filter(|(_, l)| l.is_biased()).count();
    if positives == 0 || positives == records.len() {
        return Err(DetectionError::DegenerateLabels);
    }
    let examples: Vec<Example> = ExecMode::Parallel.map(records, |(text, label)| Example {
        features: featurize(&config.features, text.as_ref()),
        label: label.as_f64(),
    });
    let mut model = DetectorModel::zeros(config.features.clone(), config.threshold)?;
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for epoch in 0..config.epochs {
        let step = objective(&model, &examples, config.l2);
        losses.push(step.loss);
        for (w, g) in model.weights.iter_mut().zip(&step.weight_gradient) {
            *w -= config.learning_rate * g;
        }
        model.bias_term -= config.learning_rate * step.bias_gradient;
        log::debug!("epoch {epoch}: loss {:.6}", step.loss);
    }
    losses.push(objective(&model, &examples, config.l2).loss);
    Ok(TrainedDetector { model, losses })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> FeatureConfig {
        FeatureConfig {
            hash_dimension: 1 << 12,
            ngram_orders: vec![1, 2],
        }
    }

    fn toy_corpus() -> Vec<(String, Label)> {
        let subjects = [
            "the mayor",
            "the senator",
            "our team",
            "the report",
            "his plan",
        ];
        let tails = [
            "was announced today",
            "drew a crowd",
            "made the news",
            "changed again",
        ];
        let mut out = Vec::new();
        for i in 0..10 {
            let s = subjects[i % subjects.len()];
            let t = tails[i % tails.len()];
            out.push((format!("{s} {t}"), Label::NonBiased));
            out.push((format!("{s} was awful and {t}"), Label::Biased));
        }
        out
    }

    #[test]
    fn empty_text_has_no_features() {
        assert_eq!(featurize(&small_config(), "").nnz(), 0);
    }

    #[test]
    fn featurize_is_deterministic() {
        let c = FeatureConfig::default();
        assert_eq!(featurize(&c, "Same text."), featurize(&c, "Same text."));
    }

    #[test]
    fn featurize_counts_unigrams_and_bigrams() {
        let c = FeatureConfig::default();
        let v = featurize(&c, "a b");
        let mut expected: Vec<u32> = ["a", "b", "a b"]
            .iter()
            .map(|g| feature_bucket(&c, g))
            .collect();
        expected.sort_unstable();
        expected.dedup();
        assert_eq!(expected.len(), 3, "no collision at default dimension");
        let got: Vec<u32> = v.entries.iter().map(|e| e.0).collect();
        assert_eq!(got, expected);
        assert!(v.entries.iter().all(|e| e.1 == 1.0));
    }

    #[test]
    fn featurize_lowercases_and_merges_repeats() {
        let c = FeatureConfig::default();
        let v = featurize(&c, "Hype hype");
        let hype = feature_bucket(&c, "hype");
        assert!(v.entries.contains(&(hype, 2.0)));
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = DetectorModel::zeros(small_config(), 0.5).unwrap();
        assert_eq!(m.predict_proba("anything at all"), 0.5);
        assert_eq!(m.classify("x").label, Label::Biased);
    }

    #[test]
    fn threshold_rule() {
        struct Fixed(f64);
        impl Detector for Fixed {
            fn predict_proba(&self, _: &str) -> f64 {
                self.0
            }
        }
        assert_eq!(Fixed(0.74).classify("").label, Label::Biased);
        assert_eq!(Fixed(0.5).classify("").label, Label::Biased);
        assert_eq!(Fixed(0.49).classify("").label, Label::NonBiased);
    }

    #[test]
    fn zero_epochs_keeps_zero_weights() {
        let config = TrainConfig {
            epochs: 0,
            features: small_config(),
            ..TrainConfig::default()
        };
        let trained = train_detector(&toy_corpus(), &config).unwrap();
        assert!(trained.model.weights.iter().all(|&w| w == 0.0));
        assert_eq!(trained.model.predict_proba("the mayor was awful"), 0.5);
        assert_eq!(trained.losses.len(), 1);
    }

    #[test]
    fn single_class_is_rejected() {
        let records = vec![("a", Label::Biased), ("b", Label::Biased)];
        assert!(matches!(
            train_detector(&records, &TrainConfig::default()),
            Err(DetectionError::DegenerateLabels)
        ));
    }

    #[test]
    fn separable_toy_corpus_fits() {
        let corpus = toy_corpus();
        let config = TrainConfig {
            features: small_config(),
            ..TrainConfig::default()
        };
        let trained = train_detector(&corpus, &config).unwrap();
        for (text, label) in &corpus {
            assert_eq!(trained.model.classify(text).label, *label, "{text}");
        }
        assert!(trained.final_loss() < trained.initial_loss());
    }

    #[test]
    fn loss_decreases_for_small_learning_rates() {
        for lr in [0.001, 0.01, 0.05, 0.1] {
            let config = TrainConfig {
                epochs: 20,
                learning_rate: lr,
                features: small_config(),
                ..TrainConfig::default()
            };
            let trained = train_detector(&toy_corpus(), &config).unwrap();
            assert!(trained.final_loss() < trained.initial_loss(), "lr {lr}");
        }
    }

    #[test]
    fn training_is_bit_identical() {
        let config = TrainConfig {
            epochs: 30,
            features: small_config(),
            ..TrainConfig::default()
        };
        let a = train_detector(&toy_corpus(), &config).unwrap();
        let b = train_detector(&toy_corpus(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trained_sentence_is_flagged() {
        let text = "Don't buy the pseudo-scientific hype about tornadoes and climate change";
        let records = vec![
            (text.to_string(), Label::Biased),
            (
                "Read the report about tornadoes".to_string(),
                Label::NonBiased,
            ),
            (
                "Officials released the storm data".to_string(),
                Label::NonBiased,
            ),
        ];
        let trained = train_detector(&records, &TrainConfig::default()).unwrap();
        assert!(trained.model.predict_proba(text) > 0.5);
    }

    #[test]
    fn appending_positive_token_raises_probability() {
        let c = FeatureConfig::default();
        let mut m = DetectorModel::zeros(c.clone(), 0.5).unwrap();
        m.weights[feature_bucket(&c, "awful") as usize] = 1.0;
        m.weights[feature_bucket(&c, "news awful") as usize] = 1.0;
        let base = m.predict_proba("good news");
        let raised = m.predict_proba("good news awful");
        assert_eq!(base, 0.5);
        // sigma(2) by hand
        assert!((raised - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!(raised > base);
    }

    #[test]
    fn probabilities_stay_strictly_inside_unit_interval() {
        let c = small_config();
        let mut m = DetectorModel::zeros(c.clone(), 0.5).unwrap();
        m.bias_term = 1e6;
        let p = m.predict_proba("x");
        assert!(p < 1.0 && p > 0.0);
        m.bias_term = -1e6;
        let p = m.predict_proba("x");
        assert!(p < 1.0 && p > 0.0);
    }

    #[test]
    fn model_file_round_trips() {
        let config = TrainConfig {
            epochs: 5,
            features: small_config(),
            ..TrainConfig::default()
        };
        let model = train_detector(&toy_corpus(), &config).unwrap().model;
        let mut bytes = Vec::new();
        model.write_to(&mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"DBDM");
        assert_eq!(bytes.len(), 4 + 4 + 8 + 4 + 2 * 4 + 8 + (1 << 12) * 8 + 8);
        let back = DetectorModel::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn loader_rejects_unknown_version_and_garbage() {
        let model = DetectorModel::zeros(
            FeatureConfig {
                hash_dimension: 4,
                ngram_orders: vec![1],
            },
            0.5,
        )
        .unwrap();
        let mut bytes = Vec::new();
        model.write_to(&mut bytes).unwrap();

        let mut bumped = bytes.clone();
        bumped[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            DetectorModel::read_from(&mut bumped.as_slice()),
            Err(DetectionError::UnsupportedVersion(2))
        ));

        let mut wrong_magic = bytes.clone();
        wrong_magic[0] = b'X';
        assert!(matches!(
            DetectorModel::read_from(&mut wrong_magic.as_slice()),
            Err(DetectionError::BadMagic)
        ));

        let truncated = &bytes[..bytes.len() - 3];
        assert!(matches!(
            DetectorModel::read_from(&mut &truncated[..]),
            Err(DetectionError::Corrupt(_))
        ));
    }

    #[test]
    fn batch_classification_matches_elementwise() {
        let config = TrainConfig {
            epochs: 50,
            features: small_config(),
            ..TrainConfig::default()
        };
        let model = train_detector(&toy_corpus(), &config).unwrap().model;
        let texts: Vec<String> = toy_corpus().into_iter().map(|(t, _)| t).collect();
        let batch = model.classify_batch(&texts, ExecMode::Parallel);
        for (t, r) in texts.iter().zip(&batch) {
            assert_eq!(*r, model.classify(t));
        }
    }
}
