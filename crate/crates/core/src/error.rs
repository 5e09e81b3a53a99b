//! Crate-wide error type. Hot loops use debug assertions; fallible API
//! boundaries return [`Error`].

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A tensor had a different shape than the operation requires.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    /// A gradient or input contained NaN/inf.
    #[error("non-finite value in {0}")]
    NonFinite(String),

    /// Backward was called without a preceding cached forward pass.
    #[error("backward called on `{0}` without a cached forward pass")]
    MissingForwardCache(String),

    /// Twin-view losses need at least two rows to standardize over.
    #[error("batch size {got} too small (need at least 2)")]
    BatchTooSmall { got: usize },

    /// The halving encoder needs dof/32 >= 1.
    #[error("dof {dof} too small for the halving architecture (need >= 32)")]
    DofTooSmall { dof: usize },

    /// Columns become read-only once frozen.
    #[error("column is frozen; {0} mutates parameters")]
    FrozenColumn(String),

    /// No rows left to train on.
    #[error("empty training set: {0}")]
    EmptyTrainingSet(String),

    /// Bad schedule or optimizer configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Direct solve failed; carries a rough condition estimate.
    #[error("singular interpolation system (condition estimate {cond_estimate:.3e})")]
    SingularSystem { cond_estimate: f64 },

    /// Artifact on disk does not match its recorded digest.
    #[error("content digest mismatch for {path}: manifest says {expected}, file hashes to {got}")]
    DigestMismatch {
        path: String,
        expected: String,
        got: String,
    },

    /// Artifact header/manifest is malformed or from an unknown version.
    #[error("bad artifact format in {path}: {reason}")]
    BadFormat { path: String, reason: String },

    // The cause stays in the `source` chain; repeating it in the message
    // double-prints under chain-walking reporters.
    #[error("i/o error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error in {path}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, got: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            got: got.into(),
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
