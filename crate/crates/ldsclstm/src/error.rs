//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),

    #[error("value for {act}-{slot} not found in sentence")]
    ValueNotFound { act: String, slot: String },

    #[error("value for {act}-{slot} overlaps a previously matched value")]
    OverlappingValues { act: String, slot: String },

    #[error("placeholder {0} has no remaining value in the meaning representation")]
    UnboundPlaceholder(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("schema error at line {line}: {reason}")]
    Schema { line: usize, reason: String },

    #[error("unknown grammar `{0}`")]
    UnknownGrammar(String),

    #[error("act-slot pair {act}-{slot} is not in the inventory")]
    UnknownActSlot { act: String, slot: String },

    #[error("sequence of length {len} exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("evaluation corpus is empty")]
    EmptyCorpus,

    #[error("corpus too small: need at least {needed} pairs, got {got}")]
    CorpusTooSmall { needed: usize, got: usize },

    #[error("outputs not aligned with dataset: expected {expected}, got {got}")]
    AlignmentError { expected: usize, got: usize },

    #[error("input is empty")]
    EmptyInput,

    #[error("beam search produced no hypotheses")]
    EmptyBeam,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
