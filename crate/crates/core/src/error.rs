use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty interval support: theta_pt {theta_pt} is not reached by N(mean={mean}, sd={std_dev}) on any admissible tick")]
    EmptySupport { mean: f64, std_dev: f64, theta_pt: f64 },

    #[error("no interval model trained for transition {from} -> {to} and no fallback available")]
    UntrainedInterval { from: usize, to: usize },

    #[error("model load error in `{field}`: {reason}")]
    ModelLoad { field: String, reason: String },

    #[error("invalid alphabet: {0}")]
    Alphabet(String),

    #[error("invalid sequence `{id}`: {reason}")]
    Sequence { id: String, reason: String },

    #[error("invalid segments in `{id}`: {reason}")]
    Segments { id: String, reason: String },

    #[error("sequence `{id}` segment {index} has duration {duration} above the duration cap {cap}")]
    DurationExceedsCap {
        id: String,
        index: usize,
        duration: usize,
        cap: usize,
    },

    #[error("sequence `{id}` has consecutive segments in state {state} but self-transitions are forbidden")]
    SelfTransition { id: String, state: usize },

    #[error("training data is empty")]
    EmptyTrainingData,

    #[error("model `{label}` is a {found} model, expected {expected}")]
    VariantMismatch {
        label: String,
        expected: &'static str,
        found: &'static str,
    },

    #[error("models disagree: {0}")]
    IncompatibleModels(String),

    #[error("infeasible generation policy: {0}")]
    InfeasiblePolicy(String),

    #[error("unsupported audio format: {0}")]
    UnsupportedAudio(String),

    #[error("corpus line {line}: {reason}")]
    Corpus { line: usize, reason: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("preset `{field}`: {reason}")]
    Preset { field: String, reason: String },

    #[error(transparent)]
    Wav(#[from] hound::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn load(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ModelLoad {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
