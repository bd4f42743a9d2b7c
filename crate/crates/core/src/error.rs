use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TextError {
    #[error("span {first}..={last} is invalid for a document of {tokens} tokens")]
    InvalidSpan {
        first: usize,
        last: usize,
        tokens: usize,
    },
    #[error("span surface {found:?} does not match document text {expected:?}")]
    SurfaceMismatch { expected: String, found: String },
    #[error("spans {left:?} and {right:?} overlap")]
    OverlappingSpans { left: String, right: String },
}

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("degenerate labels: training data needs at least one example of each class")]
    DegenerateLabels,
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("not a detector model file (bad magic bytes)")]
    BadMagic,
    #[error("unsupported detector model format version {0}")]
    UnsupportedVersion(u32),
    #[error("detector model file is truncated or corrupt: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TagError {
    #[error("tag sequence has {tags} tags but the document has {tokens} tokens")]
    LengthMismatch { tags: usize, tokens: usize },
    #[error("I tag at position {0} does not continue a span")]
    DanglingInside(usize),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DebiasError {
    #[error("invalid debias configuration: {0}")]
    InvalidConfig(String),
    #[error("input text is empty")]
    EmptyInput,
    #[error("expected one non-empty suggestion list per masked span: {0}")]
    SuggestionMismatch(String),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("predictions ({predictions}) and labels ({labels}) differ in length")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("empty input")]
    Empty,
    #[error("{0} is undefined: zero denominator")]
    Undefined(&'static str),
    #[error("undefined DI: privileged group has a zero positive rate")]
    UndefinedDisparateImpact,
    #[error("group outcome invalid: {0}")]
    InvalidGroup(String),
    #[error("AUC needs both classes present")]
    SingleClass,
    #[error("invalid G-AUC configuration: {0}")]
    InvalidConfig(String),
    #[error("every subgroup was excluded from the bias AUCs")]
    AllSubgroupsExcluded,
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("empty group {0:?}: no record mentions it")]
    EmptyGroup(String),
    #[error("invalid group configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error(transparent)]
    Detection(#[from] DetectionError),
    #[error(transparent)]
    Debias(#[from] DebiasError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}
