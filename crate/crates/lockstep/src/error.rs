//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by any stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("dangling {kind} reference: {id}")]
    DanglingReference { kind: String, id: String },

    #[error("fewer than 2 labeled posts; factuality dispersion is undefined")]
    InsufficientLabels,

    #[error("vocabulary has fewer than 2 tokens; nothing to train")]
    DegenerateVocabulary,

    #[error("embedding file is missing rows for {count} id(s): {}", ids.join(", "))]
    MissingRows { count: usize, ids: Vec<String> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("row ids of the two matrices do not match")]
    RowMismatch,

    #[error("k = {k} exceeds the number of rows ({rows})")]
    KTooLarge { k: usize, rows: usize },

    #[error("silhouette requires at least 2 non-noise clusters, found {0}")]
    TooFewClusters(usize),

    #[error("no cluster qualifies for factuality statistics (size >= 2 with >= 2 labeled posts)")]
    NoQualifyingClusters,

    #[error("empty vocabulary after tokenization")]
    EmptyVocabulary,

    #[error("meta-path starts on node type {0:?} but the graph has no such nodes")]
    NoAdmissibleStart(crate::graph::NodeType),

    #[error("invalid meta-path: {0}")]
    InvalidMetaPath(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("pipeline stage `{stage}` failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error("pca target dimension {target} exceeds min(rows, dim) = {limit}")]
    PcaTarget { target: usize, limit: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(self, stage: &str) -> Error {
        Error::Stage {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }
}
