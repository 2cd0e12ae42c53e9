use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed file: expected {expected} bytes, got {actual}")]
    MalformedFile { expected: usize, actual: usize },

    #[error("12-bit depth violation: value {value} at pixel {index} exceeds 4095")]
    DepthViolation { value: u16, index: usize },

    #[error("incomplete ground truth for case {case_id}: missing {structure}")]
    IncompleteGroundTruth { case_id: String, structure: String },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("split integrity: {0}")]
    SplitIntegrity(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("weight loading failed: {0}")]
    WeightLoad(String),

    #[error("integrity check failed for {path}: expected sha256 {expected}, got {actual}")]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("undefined measure: {0}")]
    UndefinedMeasure(String),

    #[error("empty structure: {0}")]
    EmptyStructure(String),

    #[error("non-finite loss {value} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },

    #[error("fold leakage: {0}")]
    FoldLeakage(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Candle(#[from] candle_core::Error),

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

    /// Configuration and input validation failures, as opposed to failures
    /// while running a valid job.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::MalformedFile { .. }
                | Error::DepthViolation { .. }
                | Error::IncompleteGroundTruth { .. }
                | Error::Format { .. }
                | Error::SplitIntegrity(_)
                | Error::Config(_)
                | Error::Contract(_)
                | Error::Io { .. }
        )
    }
}
