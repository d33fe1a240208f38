use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the toolkit can report.
///
/// Variants map onto the user-facing error kinds surfaced by the CLI and the
/// C ABI; [`Error::kind`] gives the stable machine-readable name.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("corrupt WAV header: {0}")]
    CorruptHeader(String),

    #[error("audio contains no samples")]
    EmptyAudio,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("breath spec does not fit: {0}")]
    SpecOverflow(String),

    #[error("clip has {len} samples, fewer than the segment length {segment_len}")]
    ClipTooShort { len: usize, segment_len: usize },

    #[error("{what} {value} outside [0, {max}]")]
    OutOfRange { what: &'static str, value: f64, max: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid box at line {line}: {message}")]
    InvalidBox { line: usize, message: String },

    #[error("malformed TextGrid at line {line}: {message}")]
    MalformedTextGrid { line: usize, message: String },

    #[error("unknown label {label:?} at line {line}")]
    UnknownLabel { label: String, line: usize },

    #[error("same-class overlap in {file}: {message}")]
    OverlapWithinClass { file: String, message: String },

    #[error("annotation invariant violated: {0}")]
    InvariantViolation(String),

    #[error("shrinking overlap would leave a phase of non-positive duration at {start_s:.6}..{end_s:.6}")]
    DegeneratePhase { start_s: f64, end_s: f64 },

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("missing file {0:?} in one of the annotation sets")]
    MissingFile(String),

    #[error("chance agreement is 1; kappa undefined")]
    DegenerateChance,

    #[error("need at least two files for chance agreement, got {0}")]
    InsufficientFiles(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O failure on {path:?}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse { line, message: message.into() }
    }

    /// Stable identifier used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnsupportedEncoding(_) => "UnsupportedEncoding",
            Error::CorruptHeader(_) => "CorruptHeader",
            Error::EmptyAudio => "EmptyAudio",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::SpecOverflow(_) => "SpecOverflow",
            Error::ClipTooShort { .. } => "ClipTooShort",
            Error::OutOfRange { .. } => "OutOfRange",
            Error::Parse { .. } => "ParseError",
            Error::InvalidBox { .. } => "InvalidBox",
            Error::MalformedTextGrid { .. } => "MalformedTextGrid",
            Error::UnknownLabel { .. } => "UnknownLabel",
            Error::OverlapWithinClass { .. } => "OverlapWithinClass",
            Error::InvariantViolation(_) => "InvariantViolation",
            Error::DegeneratePhase { .. } => "DegeneratePhase",
            Error::DomainMismatch(_) => "DomainMismatch",
            Error::MissingFile(_) => "MissingFile",
            Error::DegenerateChance => "DegenerateChance",
            Error::InsufficientFiles(_) => "InsufficientFiles",
            Error::Config(_) => "ConfigError",
            Error::Io { .. } => "IoFailure",
        }
    }
}
