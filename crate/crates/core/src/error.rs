use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("invalid polygon: {0} vertices (need at least 3)")]
    InvalidPolygon(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidInput(String),

    #[error("recall is undefined: the evaluated set contains no ground-truth instances")]
    UndefinedRecall,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("detections reference image `{0}` which has no ground-truth entry")]
    UnknownImage(String),

    #[error("mask-mode matching requires masks on every detection and ground truth")]
    MissingMask,

    #[error("{path}:{line}: malformed label line: {reason}")]
    MalformedLabel {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("not a NIfTI-1 single-file volume: bad magic {0:?}")]
    NiftiBadMagic([u8; 4]),

    #[error("unsupported NIfTI datatype code {0}")]
    NiftiUnsupportedDatatype(i16),

    #[error("truncated NIfTI file: expected {expected} bytes, found {found}")]
    NiftiTruncated { expected: usize, found: usize },

    #[error("invalid NIfTI header: {0}")]
    NiftiHeader(String),

    #[error("tensor shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("replay fixture exhausted after {0} outputs")]
    ReplayExhausted(usize),

    #[error("replay fixture has no entry for input checksum {0}")]
    ReplayChecksumMismatch(String),

    #[error("malformed replay fixture: {0}")]
    ReplayFormat(String),

    #[error("model load failed: {0}")]
    ModelLoad(String),

    #[error("backend failure: {0}")]
    Backend(String),

    #[error("unparseable ONNX graph: {0}")]
    OnnxParse(String),

    #[error("frame source error: {0}")]
    Source(String),

    #[error("frame sink error: {0}")]
    Sink(String),

    #[error("insufficient frames: need at least {needed}, source provides {available}")]
    InsufficientFrames { needed: usize, available: usize },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
