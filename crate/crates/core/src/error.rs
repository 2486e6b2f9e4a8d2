use thiserror::Error;

/// Errors produced by the engine, split by origin so callers can map them
/// onto exit codes (data/schema problems vs. numerical failures).
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error in {file}: {message}")]
    Schema { file: String, message: String },

    #[error("parse error in {file} at row {row}, column {column}: {message}")]
    Parse {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("duplicate key {key} in {file} (row {row})")]
    DuplicateKey { file: String, key: String, row: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("unit error: {0}")]
    Unit(String),

    #[error("invalid model spec: {0}")]
    Spec(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("rank deficiency: {0}")]
    RankDeficient(String),

    #[error("weak or collinear instruments: {0}")]
    WeakInstruments(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("replication {rep} (sub-seed {sub_seed}) failed: {source}")]
    Replication {
        rep: usize,
        sub_seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True when the failure is numerical (rank loss, weak instruments,
    /// non-finite values) rather than a data or usage problem.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient(_) | Error::WeakInstruments(_) | Error::NonFinite(_)
        ) || matches!(self, Error::Replication { source, .. } if source.is_numerical())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}
