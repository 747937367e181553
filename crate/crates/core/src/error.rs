use std::io;

use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error("embedding store was built from checkpoint {store}, model is {model}")]
    StaleStore { store: String, model: String },

    #[error("document {0} not found")]
    MissingDocument(u64),

    #[error("service unavailable: {0}")]
    Unavailable(String),

    #[error("benchmark target failed: {0}")]
    Target(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(what: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            what,
            detail: detail.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
