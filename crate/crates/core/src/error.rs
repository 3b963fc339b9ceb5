use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed taxonomy: {0}")]
    MalformedTaxonomy(String),

    #[error("unknown data type `{0}`")]
    UnknownDataType(String),

    #[error("unreadable artifact {path}: {reason}")]
    UnreadableArtifact { path: PathBuf, reason: String },

    #[error("malformed DEX: {0}")]
    MalformedDex(String),

    #[error("malformed tracker signature: {0}")]
    MalformedSignature(String),

    #[error("invalid hostname `{0}`")]
    InvalidHostname(String),

    #[error("unknown capture format: {0}")]
    UnknownCaptureFormat(PathBuf),

    #[error("invalid persona: {0}")]
    InvalidPersona(String),

    #[error("persona has no attributes")]
    EmptyPersona,

    #[error("no expectation rule for feature category {0}")]
    MissingPolicyRule(String),

    #[error("invalid expectation policy: {0}")]
    InvalidPolicy(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid fixture plan: {0}")]
    InvalidPlan(String),

    #[error("detections and ground truth disagree: {0}")]
    CorpusMismatch(String),

    #[error("invalid manifest: {0}")]
    InvalidManifest(String),

    #[error("CSV output failed: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
