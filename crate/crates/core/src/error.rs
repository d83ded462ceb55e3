use std::path::PathBuf;

use crate::corpus::Articulator;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("insufficient audio: {samples} samples, need at least {window}")]
    InsufficientAudio { samples: usize, window: usize },

    #[error("unsupported rate: {0} Hz (only 16000 Hz mono PCM16 is accepted)")]
    UnsupportedRate(u32),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("alignment mismatch: {contours} contour frames cannot be aligned to {target} acoustic frames")]
    AlignmentMismatch { contours: usize, target: usize },

    #[error("segmentation gap: no phone interval covers {time_ms} ms")]
    SegmentationGap { time_ms: f64 },

    #[error("unknown phone: {0}")]
    UnknownPhone(String),

    #[error("corpus too small: {0} acquisitions, need at least 3")]
    CorpusTooSmall(usize),

    #[error("dimension error: {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("no forward state: run a forward pass before backward")]
    NoForwardState,

    #[error("bad spec: {0}")]
    BadSpec(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("invalid labels: row {0} is not one-hot")]
    InvalidLabels(usize),

    #[error("batch mismatch: {regression} regression frames vs {classification} classification frames")]
    BatchMismatch {
        regression: usize,
        classification: usize,
    },

    #[error("contour length error: expected 100 values, got {0}")]
    ContourLength(usize),

    #[error("empty articulator: no evaluated frames for {0}")]
    EmptyArticulator(Articulator),

    #[error("divergence: non-finite gradient at step {step}")]
    Divergence { step: u64 },

    #[error("empty split: {0}")]
    EmptySplit(&'static str),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("malformed {kind} in {path}: {message}")]
    Format {
        kind: &'static str,
        path: PathBuf,
        message: String,
    },

    #[error("missing baseline run: {0}")]
    MissingBaseline(String),

    #[error("frame {0} not present")]
    FrameAbsent(usize),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        kind: &'static str,
        path: impl Into<PathBuf>,
        message: impl ToString,
    ) -> Self {
        Error::Format {
            kind,
            path: path.into(),
            message: message.to_string(),
        }
    }

    /// True for failures of the numerics rather than of the input data.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Divergence { .. })
    }
}
