use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the toolkit can report.
///
/// Variants are grouped by the exit status the CLI maps them to, see
/// [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {op} got {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid shape {shape:?} for {len} values")]
    Shape { shape: Vec<usize>, len: usize },

    #[error("axis {axis} out of range for rank {rank}")]
    Axis { axis: usize, rank: usize },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("sequence too short in {layer}: length {length} < required {required}")]
    SequenceTooShort {
        layer: &'static str,
        length: usize,
        required: usize,
    },

    #[error("cache mismatch in {layer}: {detail}")]
    CacheMismatch { layer: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: header mismatch: expected `{expected}`, found `{found}`")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("{path}:{line}: cannot parse {column} value `{value}`")]
    ParseValue {
        path: PathBuf,
        line: usize,
        column: String,
        value: String,
    },

    #[error("{path}:{line}: duplicate date {date}")]
    DuplicateDate {
        path: PathBuf,
        line: usize,
        date: String,
    },

    #[error("{path}:{line}: {detail}")]
    Csv {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    #[error("column `{0}` has no usable values")]
    EmptyColumn(String),

    #[error("series has {length} rows, at least {required} needed for {what}")]
    TooShort {
        what: String,
        length: usize,
        required: usize,
    },

    #[error("division by zero: previous close is 0 at {0}")]
    ZeroDivision(String),

    #[error("zero variance in `{0}`")]
    ZeroVariance(String),

    #[error("empty {0} split")]
    EmptySplit(String),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("unsupported format version: expected `{expected}`, found `{found}`")]
    Version { expected: String, found: String },

    #[error("malformed file at line {line}: {detail}")]
    Malformed { line: usize, detail: String },

    #[error("shape disagreement for `{name}`: expected {expected:?}, found {found:?}")]
    ShapeDisagreement {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("gradient check failed: {0}")]
    Verification(String),

    #[error("{path}: {source}")]
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

    /// Process exit status: 2 input, 3 divergence, 4 compatibility, 5 verification.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } => 3,
            Error::Incompatible(_)
            | Error::EmptySplit(_)
            | Error::Version { .. }
            | Error::ShapeDisagreement { .. } => 4,
            Error::Verification(_) => 5,
            _ => 2,
        }
    }
}
