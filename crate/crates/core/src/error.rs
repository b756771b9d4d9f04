//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the public API.
///
/// Validation errors (bad inputs, bad config, degenerate data) are
/// distinguished from runtime failures (non-finite numerics, I/O) so the
/// CLI can map them to different exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("dimension mismatch at layer {layer} of {model}: expected input width {expected}, got {actual}")]
    LayerMismatch {
        model: String,
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("background-only image: {found} tissue pixels above the optical-density threshold, need {required}")]
    BackgroundOnly { found: usize, required: usize },

    #[error("constant image: {0}")]
    ConstantImage(String),

    #[error("no informative patients: {0}")]
    NoInformativePatients(String),

    #[error("unknown layer {name:?}; available layers: {available:?}")]
    UnknownLayer {
        name: String,
        available: Vec<String>,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch} (loss {loss:.3e} exceeded {limit:.1e})")]
    Diverged { epoch: usize, loss: f64, limit: f64 },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by caller-supplied inputs rather than
    /// failures encountered mid-computation.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::NonFinite(_) | Error::Diverged { .. } | Error::Io(_) | Error::Csv(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
