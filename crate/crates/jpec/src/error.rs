//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix is not symmetric (first asymmetric entry at row {row}, col {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("row {row} has non-positive sum {sum}; cannot normalize")]
    ZeroRowSum { row: usize, sum: f64 },

    #[error("non-finite value produced in {context}")]
    NonFinite { context: String },

    #[error("invalid sparse structure: {0}")]
    InvalidSparse(String),

    #[error("self-pair ({i},{i}) is not allowed")]
    SelfPair { i: usize },

    #[error("node index {index} out of range for graph of {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("pair ({i},{j}) has non-positive weight {w}")]
    NonPositiveWeight { i: usize, j: usize, w: f64 },

    #[error("{kind} edge ({i},{j}) is a self-loop")]
    SelfLoop {
        kind: &'static str,
        i: usize,
        j: usize,
    },

    #[error("competitor pair ({i},{j}) is not in canonical order (expected smaller index first)")]
    NonCanonicalPair { i: usize, j: usize },

    #[error("competitor pair ({i},{j}) appears more than once")]
    DuplicatePair { i: usize, j: usize },

    #[error("attribute matrix has {rows} rows but graph has {n} nodes")]
    AttrRowsMismatch { rows: usize, n: usize },

    #[error("pair ({i},{j}) is labeled negative but is a known competitor edge")]
    NegativeOverlapsPositive { i: usize, j: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("negative sampling infeasible: requested {requested} pairs, found {found} after {attempts} attempts")]
    SamplingInfeasible {
        requested: usize,
        found: usize,
        attempts: usize,
    },

    #[error("split infeasible: requested removal of {requested} competitor edges, only {removed} removable under the visibility constraint")]
    SplitInfeasible { requested: usize, removed: usize },

    #[error("split produced no qualifying query nodes ({0})")]
    EmptyQuerySet(String),

    #[error("candidate pool for query {query} is empty after exclusions")]
    EmptyPool { query: usize },

    #[error("query {query} has an empty relevant set")]
    EmptyRelevantSet { query: usize },

    #[error("training diverged: non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{path}: line {line}: unknown node id '{id}'")]
    UnknownId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}: line {line}: duplicate node id '{id}'")]
    DuplicateId {
        path: PathBuf,
        line: usize,
        id: String,
    },

    #[error("{path}: unsupported format version {found_major}.{found_minor} (supported major version is {supported_major})")]
    FormatVersion {
        path: PathBuf,
        found_major: u16,
        found_minor: u16,
        supported_major: u16,
    },

    #[error("{path}: file is truncated or corrupt ({detail})")]
    Truncated { path: PathBuf, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
