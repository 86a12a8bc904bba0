use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("OBJ parse error in {path} line {line}: {message}")]
    Obj {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("mesh topology mismatch: {0}")]
    TopologyMismatch(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("timestamps must be finite and strictly increasing: {0}")]
    NonMonotoneTimestamps(String),

    #[error("time {t} s outside sequence range [{start}, {end}] s")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid radar configuration: {0}")]
    InvalidConfig(String),

    #[error("target coincides with the radar position")]
    ZeroRange,

    #[error("facet lies behind the radar")]
    BehindRadar,

    #[error("echo delay {delay_s:e} s exceeds the unambiguous maximum {max_delay_s:e} s")]
    DelayOutOfRange { delay_s: f64, max_delay_s: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown segment id {0}")]
    UnknownSegment(u32),

    #[error("spectrogram is already in dB")]
    AlreadyDb,

    #[error("spectrogram must be linear magnitude, not dB")]
    ExpectedLinear,

    #[error("payload size mismatch: sidecar declares {expected} values, payload holds {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("lexicon has no entry for action `{0}`")]
    UncoveredLemma(String),

    #[error("requested {requested} prompts but only {available} distinct combinations exist (short by {})", requested - available)]
    NotEnoughCombinations { requested: usize, available: usize },

    #[error("LLM endpoint unreachable after {attempts} attempts: {message}")]
    Network { attempts: u32, message: String },

    #[error("malformed LLM response: {message}; raw payload: {raw}")]
    MalformedResponse { message: String, raw: String },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("zero-length vector")]
    ZeroVector,

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dataset entry `{id}` failed: {message}")]
    Entry { id: String, message: String },

    #[error("PNG encoding failed: {0}")]
    Png(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Short stable identifier for machine-readable error reporting.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
            Error::Obj { .. } => "obj",
            Error::TopologyMismatch(_) => "topology_mismatch",
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::NonMonotoneTimestamps(_) => "non_monotone_timestamps",
            Error::TimeOutOfRange { .. } => "time_out_of_range",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::InvalidConfig(_) => "invalid_config",
            Error::ZeroRange => "zero_range",
            Error::BehindRadar => "behind_radar",
            Error::DelayOutOfRange { .. } => "delay_out_of_range",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::UnknownSegment(_) => "unknown_segment",
            Error::AlreadyDb => "already_db",
            Error::ExpectedLinear => "expected_linear",
            Error::SizeMismatch { .. } => "size_mismatch",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::UncoveredLemma(_) => "uncovered_lemma",
            Error::NotEnoughCombinations { .. } => "not_enough_combinations",
            Error::Network { .. } => "network",
            Error::MalformedResponse { .. } => "malformed_response",
            Error::NonFinite(_) => "non_finite",
            Error::ZeroVector => "zero_vector",
            Error::Empty(_) => "empty",
            Error::Entry { .. } => "entry",
            Error::Png(_) => "png",
        }
    }
}
