use std::path::PathBuf;

use thiserror::Error;

use crate::syntax::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),

    #[error("source contains no tokens")]
    EmptySource,

    #[error("grammar could not be loaded: {0}")]
    Grammar(String),

    #[error("node {0} is not part of the graph")]
    UnknownNode(NodeId),

    #[error("node {0} is a statement holder, not a statement")]
    NotAStatement(NodeId),

    #[error("views were built over different snippets")]
    MismatchedSnippet,

    #[error("mask references statement {0}, which the snippet does not contain")]
    MaskMismatch(NodeId),

    #[error("subword map covers {got} tokens but the mask has {expected}")]
    MapMismatch { expected: usize, got: usize },

    #[error("subword count for token {0} is zero")]
    ZeroSubwordCount(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed mask stream: {0}")]
    MalformedMask(String),

    #[error("no manifest found in {0}")]
    MissingManifest(PathBuf),

    #[error("metric input is empty")]
    EmptyInput,

    #[error("prediction and truth lengths differ ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },

    #[error("label {label} is outside 0..{classes}")]
    UnknownLabel { label: usize, classes: usize },

    #[error("rank must be at least 1 (query `{0}`)")]
    InvalidRank(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
