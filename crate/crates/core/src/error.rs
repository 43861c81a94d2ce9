use thiserror::Error;

pub type Result<T> = std::result::Result<T, QcnnError>;

#[derive(Debug, Error)]
pub enum QcnnError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("qubit index {index} out of range for {num_qubits} qubits")]
    QubitOutOfRange { index: usize, num_qubits: usize },

    #[error("gate {kind:?} requires an angle but none was supplied")]
    MissingAngle { kind: crate::sim::GateKind },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("noise probability {0} outside [0, 0.75]")]
    NoiseOutOfRange(f64),

    #[error("empty survivor set")]
    EmptySurvivors,

    #[error("cannot trace out every qubit")]
    TraceAll,

    #[error("parameter vector has {got} entries, circuit declares {expected} symbols")]
    SymbolMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("cannot normalize an all-zero input vector")]
    ZeroNorm,

    #[error("input length {len} exceeds 2^{num_qubits}")]
    InputTooLong { len: usize, num_qubits: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("IDX format error in {path}: {reason}")]
    IdxFormat { path: String, reason: String },

    #[error("IDX payload truncated in {path}: expected {expected} bytes, found {found}")]
    IdxTruncated {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("no samples of digit {0}")]
    MissingClass(u8),

    #[error("invalid split fractions: {0}")]
    InvalidSplit(String),

    #[error("cache format error: {0}")]
    CacheFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
