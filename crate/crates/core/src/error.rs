use std::path::PathBuf;

use rtrl_chem::ChemError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate token {0:?} in vocabulary")]
    DuplicateToken(String),
    #[error("vocabulary has no user tokens")]
    EmptyVocab,
    #[error("malformed vocabulary list: {0}")]
    BadVocabList(String),
    #[error("unit {unit:?} at offset {offset} is not in the vocabulary")]
    OutOfVocabulary { unit: String, offset: usize },
    #[error("token id {0} is outside the vocabulary")]
    BadTokenId(u32),
    #[error("unknown task {0:?}")]
    UnregisteredTask(String),
    #[error("invalid sampler config: {0}")]
    InvalidSampler(String),
    #[error("cannot sample from an all-zero distribution")]
    AllZeroDistribution,
    #[error("invalid model order {0}")]
    BadOrder(usize),
    #[error("logit row has length {found}, expected {expected}")]
    RowWidth { expected: usize, found: usize },
    #[error("non-finite value at context {key}")]
    NonFinite { key: String },
    #[error("learning rate must be positive and finite, got {0}")]
    BadLearningRate(f64),
    #[error("empty batch")]
    EmptyBatch,
    #[error("group needs at least two rewards, got {0}")]
    GroupTooSmall(usize),
    #[error("non-finite loss term in group {group}, completion {completion}")]
    NonFiniteLoss { group: usize, completion: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("empty reference")]
    EmptyReference,
    #[error("metric input is empty")]
    EmptyInput,
    #[error("set {which} has {size} usable molecules, need at least 2")]
    SetTooSmall { which: char, size: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {msg}")]
    Malformed {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("split fractions must be positive and sum to 1")]
    BadFractions,
    #[error("data generation failed: {0}")]
    Generation(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("record {0} has no label")]
    MissingLabel(usize),
    #[error("no synthetic record survived the format filter (survival rate {survival:.3})")]
    EmptySynthetic { survival: f64 },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("vocabulary hash mismatch: expected {expected}, found {found}")]
    VocabMismatch { expected: String, found: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Chem(#[from] ChemError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
