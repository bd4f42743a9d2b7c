//! Sentence-level bias detection, bias-bearing span recognition, masked
//! infilling with detector re-scoring, and fairness metrics.

pub mod dataset;
pub mod debias;
pub mod detection;
pub mod error;
pub mod exec;
pub mod metrics;
pub mod pipeline;
pub mod recognition;
pub mod synthetic;
pub mod text;

pub use debias::{debias, DebiasConfig, DebiasResult, DebiasStatus};
pub use detection::{train_detector, Detector, DetectorModel, Label, TrainConfig};
pub use error::*;
pub use exec::ExecMode;
pub use pipeline::{evaluate_before_after, run_pipeline, Models, PipelineConfig, PipelineReport};
pub use recognition::{Lexicon, LexiconRecognizer, Recognizer};
pub use text::{tokenize, Document, Span, Token};
