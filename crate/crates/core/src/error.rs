use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("entry ({row}, {col}) out of range for a {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),

    #[error("dimension mismatch: expected length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix has no rows; per-row statistics are undefined")]
    EmptyMatrix,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("unsupported Matrix Market format: {0}")]
    UnsupportedFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("placement infeasible: {0}")]
    Placement(String),

    #[error("partition has no nonzeros")]
    NoNonzeros,

    #[error("zero L2 accesses on the {0} side")]
    ZeroL2Accesses(&'static str),

    #[error(
        "counter sources conflict for {matrix} ({threads} threads): pass an explicit precedence"
    )]
    ConflictingCounterSources { matrix: String, threads: usize },

    #[error("counter import: {0}")]
    CounterImport(String),

    #[error("feature column `{0}` is present for some samples and absent for others")]
    PartialColumn(String),

    #[error("missing feature `{0}`")]
    MissingFeature(String),

    #[error("training: {0}")]
    Training(String),

    #[error("tree index {index} out of range (model has {len} trees)")]
    TreeIndex { index: usize, len: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
