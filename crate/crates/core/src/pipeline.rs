//! End-to-end orchestration: per-sentence debiasing of documents, the
//! before/after evaluation protocol and the masking ablation.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{side_of, write_jsonl, GroupConfig, IdentityMatcher, MbicRecord, Side};
use crate::debias::{
    debias, debias_masked, mask_random, mask_spans, DebiasConfig, DebiasRecord, DebiasResult,
    Infiller, NgramInfiller,
};
use crate::detection::{train_detector, Detector, DetectorModel, Label, TrainConfig};
use crate::error::PipelineError;
use crate::exec::ExecMode;
use crate::metrics::{
    confusion, disparate_impact, generalized_bias_auc, ConfusionMatrix, DisparateImpact,
    GaucConfig, GroupOutcome, Subgroup,
};
use crate::recognition::{build_lexicon, Lexicon, LexiconRecognizer, Recognizer};
use crate::text::{tokenize, SentenceSplitter, Span};

/// The three pluggable stages.
pub struct Models {
    pub detector: Box<dyn Detector>,
    pub recognizer: Box<dyn Recognizer>,
    pub infiller: Box<dyn Infiller>,
}

impl Models {
    pub fn new(
        detector: impl Detector + 'static,
        recognizer: impl Recognizer + 'static,
        infiller: impl Infiller + 'static,
    ) -> Self {
        Self {
            detector: Box::new(detector),
            recognizer: Box::new(recognizer),
            infiller: Box::new(infiller),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub train: TrainConfig,
    /// Lexicon terms scoring below this are not recognized.
    pub min_score: f64,
    /// Keep recognized lexicon terms out of infill suggestions.
    pub block_lexicon_terms: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            min_score: 0.5,
            block_lexicon_terms: true,
        }
    }
}

/// Built-in models fitted to a labeled corpus.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub detector: DetectorModel,
    pub lexicon: Lexicon,
    pub infiller: NgramInfiller,
    pub min_score: f64,
    pub losses: Vec<f64>,
}

impl TrainedModels {
    pub fn recognizer(&self) -> LexiconRecognizer {
        LexiconRecognizer::new(self.lexicon.clone()).with_min_score(self.min_score)
    }

    pub fn into_models(self) -> Models {
        let recognizer = LexiconRecognizer::new(self.lexicon).with_min_score(self.min_score);
        Models::new(self.detector, recognizer, self.infiller)
    }
}

/// Detector on every record, lexicon from the biased-word annotations,
/// infiller from the non-biased sentences.
pub fn train_models(
    records: &[MbicRecord],
    config: &ModelConfig,
) -> Result<TrainedModels, PipelineError> {
    let labeled: Vec<(&str, Label)> = records
        .iter()
        .map(|r| (r.sentence.as_str(), r.label))
        .collect();
    let trained = train_detector(&labeled, &config.train)?;
    let lexicon = build_lexicon(records);
    let infiller = train_infiller(records, &lexicon, config);
    Ok(TrainedModels {
        detector: trained.model,
        lexicon,
        infiller,
        min_score: config.min_score,
        losses: trained.losses,
    })
}

/// Infiller trained on the non-biased sentences, optionally blocked from
/// suggesting lexicon terms that score at least `config.min_score`.
pub fn train_infiller(
    records: &[MbicRecord],
    lexicon: &Lexicon,
    config: &ModelConfig,
) -> NgramInfiller {
    let neutral: Vec<&str> = records
        .iter()
        .filter(|r| !r.label.is_biased())
        .map(|r| r.sentence.as_str())
        .collect();
    let infiller = NgramInfiller::train(&neutral);
    if !config.block_lexicon_terms {
        return infiller;
    }
    let blocked: Vec<&str> = lexicon
        .iter()
        .filter(|(_, e)| e.score() >= config.min_score)
        .map(|(t, _)| t)
        .collect();
    infiller.with_blocked(blocked)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub debias: DebiasConfig,
    /// When false, evaluation leaves the test texts untouched.
    pub debias_enabled: bool,
    pub split_seed: u64,
    pub test_fraction: f64,
    pub gauc: GaucConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            debias: DebiasConfig::default(),
            debias_enabled: true,
            split_seed: 42,
            test_fraction: 0.2,
            gauc: GaucConfig::default(),
        }
    }
}

/// A document after per-sentence debiasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub index: usize,
    pub original: String,
    pub output: String,
    /// Mean of the sentence probabilities; zero for a document without
    /// sentences.
    pub original_probability: f64,
    pub output_probability: f64,
    pub sentences: Vec<DebiasResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub index: usize,
    pub original: String,
    pub output: String,
    pub original_probability: f64,
    pub output_probability: f64,
    pub sentences: Vec<DebiasRecord>,
}

impl DocumentResult {
    pub fn to_record(&self) -> DocumentRecord {
        DocumentRecord {
            index: self.index,
            original: self.original.clone(),
            output: self.output.clone(),
            original_probability: self.original_probability,
            output_probability: self.output_probability,
            sentences: self.sentences.iter().map(DebiasResult::to_record).collect(),
        }
    }
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    if n == 0 {
        0.0
    } else {
        values.sum::<f64>() / n as f64
    }
}

fn process_document(
    models: &Models,
    splitter: &SentenceSplitter,
    index: usize,
    text: &str,
    config: &DebiasConfig,
) -> Result<DocumentResult, PipelineError> {
    let mut output = String::with_capacity(text.len());
    let mut sentences = Vec::new();
    for piece in splitter.split(text) {
        let core = piece.trim();
        if core.is_empty() {
            output.push_str(piece);
            continue;
        }
        let lead = &piece[..piece.len() - piece.trim_start().len()];
        let trail = &piece[piece.trim_end().len()..];
        let result = debias(
            models.detector.as_ref(),
            models.recognizer.as_ref(),
            models.infiller.as_ref(),
            core,
            config,
        )?;
        output.push_str(lead);
        output.push_str(result.output_text());
        output.push_str(trail);
        sentences.push(result);
    }
    Ok(DocumentResult {
        index,
        original: text.to_string(),
        output,
        original_probability: mean(sentences.iter().map(|s| s.original_probability)),
        output_probability: mean(sentences.iter().map(DebiasResult::output_probability)),
        sentences,
    })
}

/// Splits each text into sentences and debiases them one by one;
/// non-biased sentences come through byte-identical.
pub fn run_pipeline<S: AsRef<str> + Sync>(
    models: &Models,
    texts: &[S],
    config: &DebiasConfig,
) -> Result<Vec<DocumentResult>, PipelineError> {
    config.validate()?;
    let splitter = SentenceSplitter::default();
    let indexed: Vec<(usize, &str)> = texts.iter().map(AsRef::as_ref).enumerate().collect();
    config
        .exec
        .map(&indexed, |&(i, text)| {
            process_document(models, &splitter, i, text, config)
        })
        .into_iter()
        .collect()
}

pub fn write_documents_jsonl<W: Write>(
    out: W,
    documents: &[DocumentResult],
) -> Result<(), PipelineError> {
    let records: Vec<DocumentRecord> = documents.iter().map(DocumentResult::to_record).collect();
    write_jsonl(out, &records)?;
    Ok(())
}

/// Train and test record indices, each sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded split stratified by label: each class contributes
/// `round(test_fraction * class size)` records to the test side.
pub fn stratified_split(
    records: &[MbicRecord],
    test_fraction: f64,
    seed: u64,
) -> Result<Split, PipelineError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(PipelineError::DegenerateSplit(format!(
            "test fraction must lie in (0,1), got {test_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
    };
    for class in [Label::Biased, Label::NonBiased] {
        let mut idx: Vec<usize> = (0..records.len())
            .filter(|&i| records[i].label == class)
            .collect();
        idx.shuffle(&mut rng);
        let n_test = (test_fraction * idx.len() as f64).round() as usize;
        if n_test == 0 || n_test == idx.len() {
            return Err(PipelineError::DegenerateSplit(format!(
                "{} {class:?} records cannot be split {test_fraction} for testing",
                idx.len()
            )));
        }
        split.test.extend_from_slice(&idx[..n_test]);
        split.train.extend_from_slice(&idx[n_test..]);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// DI per protected attribute plus a pooled value over all attributes.
/// `None` marks an undefined ratio (an empty side or a zero privileged rate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiSummary {
    pub per_attribute: BTreeMap<String, Option<DisparateImpact>>,
    pub pooled: Option<DisparateImpact>,
}

/// Per-instance group sides for every attribute, fixed from the original text.
struct Membership {
    sides: Vec<(String, Vec<Option<Side>>)>,
    subgroups: Vec<Subgroup>,
}

impl Membership {
    fn new<S: AsRef<str>>(texts: &[S], groups: &GroupConfig) -> Self {
        let matcher = IdentityMatcher::new(&groups.groups);
        let mentions: Vec<_> = texts.iter().map(|t| matcher.mentions(t.as_ref())).collect();
        let sides = groups
            .groups
            .iter()
            .map(|spec| {
                let s = mentions.iter().map(|m| side_of(spec, m)).collect();
                (spec.attribute.clone(), s)
            })
            .collect();
        let mut subgroups = Vec::new();
        for spec in &groups.groups {
            for value in spec.values() {
                let members: Vec<bool> = mentions
                    .iter()
                    .map(|m| m.contains(&(spec.attribute.as_str(), value.as_str())))
                    .collect();
                if members.iter().any(|&b| b) {
                    subgroups.push(Subgroup {
                        name: format!("{}:{value}", spec.attribute),
                        members,
                    });
                }
            }
        }
        Self { sides, subgroups }
    }

    fn disparate_impact(&self, positives: &[bool]) -> DiSummary {
        let mut pooled = [(0u64, 0u64); 2];
        let mut per_attribute = BTreeMap::new();
        for (attribute, sides) in &self.sides {
            let mut counts = [(0u64, 0u64); 2];
            for (&positive, side) in positives.iter().zip(sides) {
                let slot = match side {
                    Some(Side::Unprivileged) => 0,
                    Some(Side::Privileged) => 1,
                    None => continue,
                };
                counts[slot].1 += 1;
                counts[slot].0 += u64::from(positive);
            }
            for slot in 0..2 {
                pooled[slot].0 += counts[slot].0;
                pooled[slot].1 += counts[slot].1;
            }
            per_attribute.insert(attribute.clone(), di_from_counts(attribute, counts));
        }
        DiSummary {
            per_attribute,
            pooled: di_from_counts("pooled", pooled),
        }
    }
}

fn di_from_counts(name: &str, counts: [(u64, u64); 2]) -> Option<DisparateImpact> {
    let unpriv = GroupOutcome::new(
        format!("{name}:unprivileged"),
        false,
        counts[0].0,
        counts[0].1,
    );
    let priv_ = GroupOutcome::new(format!("{name}:privileged"), true, counts[1].0, counts[1].1);
    match disparate_impact(&unpriv, &priv_) {
        Ok(di) => Some(di),
        Err(e) => {
            log::warn!("DI for {name} is undefined: {e}");
            None
        }
    }
}

/// Label-based DI of a corpus, with group sides taken from identity mentions.
pub fn dataset_disparate_impact(records: &[MbicRecord], groups: &GroupConfig) -> DiSummary {
    let texts: Vec<&str> = records.iter().map(|r| r.sentence.as_str()).collect();
    let labels: Vec<bool> = records.iter().map(|r| r.label.is_biased()).collect();
    Membership::new(&texts, groups).disparate_impact(&labels)
}

/// Detector metrics on one version of the test split. Undefined values are
/// `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub confusion: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub accuracy: Option<f64>,
    /// DI of the detector's positive predictions.
    pub di: DiSummary,
    pub g_auc: Option<f64>,
    pub mean_probability: f64,
}

fn snapshot<S: AsRef<str> + Sync>(
    detector: &dyn Detector,
    texts: &[S],
    labels: &[bool],
    membership: &Membership,
    gauc: &GaucConfig,
    exec: ExecMode,
) -> Result<MetricSnapshot, PipelineError> {
    let results = exec.map(texts, |t| detector.classify(t.as_ref()));
    let predictions: Vec<bool> = results.iter().map(|r| r.label.is_biased()).collect();
    let scores: Vec<f64> = results.iter().map(|r| r.probability).collect();
    let cm = confusion(&predictions, labels)?;
    let g_auc = match generalized_bias_auc(&scores, labels, &membership.subgroups, gauc) {
        Ok(report) => Some(report.value),
        Err(e) => {
            log::warn!("G-AUC is undefined: {e}");
            None
        }
    };
    Ok(MetricSnapshot {
        confusion: cm,
        precision: cm.precision().ok(),
        recall: cm.recall().ok(),
        f1: cm.f1().ok(),
        accuracy: cm.accuracy().ok(),
        di: membership.disparate_impact(&predictions),
        g_auc,
        mean_probability: mean(scores.iter().copied()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub record: usize,
    pub original: String,
    pub output: String,
    pub original_probability: f64,
    pub output_probability: f64,
    pub spans: usize,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub split_seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub debias_enabled: bool,
    pub before: MetricSnapshot,
    pub after: MetricSnapshot,
    /// Label-based DI on the test split.
    pub dataset_di: DiSummary,
    pub per_document: Vec<DocumentSummary>,
}

/// Metrics on the raw test split and on its debiased version, both scored
/// with the same detector against the original labels. Group membership is
/// read from the original sentences for both halves.
pub fn evaluate_before_after(
    records: &[MbicRecord],
    models: &Models,
    groups: &GroupConfig,
    config: &PipelineConfig,
) -> Result<PipelineReport, PipelineError> {
    let split = stratified_split(records, config.test_fraction, config.split_seed)?;
    let test: Vec<&MbicRecord> = split.test.iter().map(|&i| &records[i]).collect();
    let texts: Vec<&str> = test.iter().map(|r| r.sentence.as_str()).collect();
    let labels: Vec<bool> = test.iter().map(|r| r.label.is_biased()).collect();
    let membership = Membership::new(&texts, groups);
    for (attribute, sides) in &membership.sides {
        for side in [Side::Unprivileged, Side::Privileged] {
            if !sides.contains(&Some(side)) {
                log::warn!("test split has no {side:?} record for {attribute}");
            }
        }
    }
    let exec = config.debias.exec;
    let detector = models.detector.as_ref();
    let before = snapshot(detector, &texts, &labels, &membership, &config.gauc, exec)?;

    let (after, per_document) = if config.debias_enabled {
        let documents = run_pipeline(models, &texts, &config.debias)?;
        let outputs: Vec<&str> = documents.iter().map(|d| d.output.as_str()).collect();
        let after = snapshot(detector, &outputs, &labels, &membership, &config.gauc, exec)?;
        let summaries = documents
            .iter()
            .zip(&split.test)
            .map(|(d, &record)| DocumentSummary {
                record,
                original: d.original.clone(),
                output: d.output.clone(),
                original_probability: d.original_probability,
                output_probability: d.output_probability,
                spans: d.sentences.iter().map(|s| s.spans.len()).sum(),
                changed: d.output != d.original,
            })
            .collect();
        (after, summaries)
    } else {
        let summaries = texts
            .iter()
            .zip(&split.test)
            .map(|(t, &record)| {
                let p = detector.predict_proba(t);
                DocumentSummary {
                    record,
                    original: t.to_string(),
                    output: t.to_string(),
                    original_probability: p,
                    output_probability: p,
                    spans: 0,
                    changed: false,
                }
            })
            .collect();
        (before.clone(), summaries)
    };

    let test_records: Vec<MbicRecord> = test.into_iter().cloned().collect();
    Ok(PipelineReport {
        split_seed: config.split_seed,
        train_size: split.train.len(),
        test_size: split.test.len(),
        debias_enabled: config.debias_enabled,
        before,
        after,
        dataset_di: dataset_disparate_impact(&test_records, groups),
        per_document,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Masking {
    Random,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub masking: Masking,
    /// Masking probability; absent for the exact-span row.
    pub p: Option<f64>,
    pub biased_inputs: usize,
    pub accepted: usize,
    pub success_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub fraction: f64,
    pub seed: u64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn exact(&self) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.masking == Masking::Exact)
    }
}

fn input_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Success rate of debiasing when random masking replaces the recognized
/// spans, one row per `p`, followed by the exact-span row.
///
/// Only sentences the detector classifies as biased are counted; a sentence
/// succeeds when some candidate passes the acceptance rule.
pub fn ablation_masking(
    records: &[MbicRecord],
    models: &Models,
    p_values: &[f64],
    fraction: f64,
    seed: u64,
    config: &DebiasConfig,
) -> Result<AblationReport, PipelineError> {
    config.validate()?;
    let detector = models.detector.as_ref();
    let infiller = models.infiller.as_ref();
    let scored = config.exec.map(records, |r| detector.classify(&r.sentence));
    let biased: Vec<(usize, &str, f64)> = scored
        .into_iter()
        .enumerate()
        .filter(|(_, d)| d.label.is_biased())
        .map(|(i, d)| (i, records[i].sentence.as_str(), d.probability))
        .collect();
    let row = |masking,
               p,
               outcomes: Vec<Result<bool, PipelineError>>|
     -> Result<AblationRow, PipelineError> {
        let accepted = outcomes.into_iter().collect::<Result<Vec<bool>, _>>()?;
        let accepted = accepted.into_iter().filter(|&a| a).count();
        Ok(AblationRow {
            masking,
            p,
            biased_inputs: biased.len(),
            accepted,
            success_rate: if biased.is_empty() {
                0.0
            } else {
                accepted as f64 / biased.len() as f64
            },
        })
    };

    let mut rows = Vec::with_capacity(p_values.len() + 1);
    for &p in p_values {
        let outcomes = config.exec.map(&biased, |&(i, sentence, prob)| {
            let doc = tokenize(sentence);
            let masked = mask_random(&doc, fraction, p, input_seed(seed, i))?;
            let (_, chosen) = debias_masked(detector, infiller, &masked, prob, config)?;
            Ok(chosen.is_some())
        });
        rows.push(row(Masking::Random, Some(p), outcomes)?);
    }
    let outcomes = config.exec.map(&biased, |&(_, sentence, prob)| {
        let doc = tokenize(sentence);
        let spans: Vec<Span> = models
            .recognizer
            .recognize(&doc)
            .into_iter()
            .map(|s| s.span)
            .collect();
        let masked = mask_spans(&doc, &spans)?;
        let (_, chosen) = debias_masked(detector, infiller, &masked, prob, config)?;
        Ok(chosen.is_some())
    });
    rows.push(row(Masking::Exact, None, outcomes)?);
    Ok(AblationReport {
        fraction,
        seed,
        rows,
    })
}
