use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate example id {0:?}")]
    DuplicateId(String),

    #[error("example {id:?}: token_length must be >= 1, got {value}")]
    InvalidTokenLength { id: String, value: i64 },

    #[error("example {0:?} has neither token_length nor text")]
    MissingLength(String),

    #[error("run table header: {0}")]
    BadHeader(String),

    #[error("run table row {row}: {message}")]
    BadRow { row: usize, message: String },

    #[error("empty selection")]
    EmptySelection,

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("budgets must be strictly ascending: {prev} then {next}")]
    BudgetsNotAscending { prev: u64, next: u64 },

    #[error("accuracy {accuracy} at record {index} is not above E={e} by the positivity margin {margin}")]
    Positivity {
        index: usize,
        accuracy: f64,
        e: f64,
        margin: f64,
    },

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("no feasible E on grid [{e_min}, {e_max}] (min accuracy {min_accuracy}); lower the grid bound")]
    InfeasibleGrid {
        e_min: f64,
        e_max: f64,
        min_accuracy: f64,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("accuracy {accuracy} does not exceed E={e}; point excluded")]
    ExcludedPoint { accuracy: f64, e: f64 },

    #[error("length mismatch: {rows} rows vs {reported} reported volumes")]
    LengthMismatch { rows: usize, reported: usize },

    #[error("strategy {strategy:?} has {got} records, need at least {needed}")]
    InsufficientRecords {
        strategy: String,
        got: usize,
        needed: usize,
    },

    #[error("volume group {group}: volumes span {min}..{max}, beyond {tolerance} relative")]
    VolumeMismatch {
        group: usize,
        min: f64,
        max: f64,
        tolerance: f64,
    },

    #[error("synthetic spec: {0}")]
    Synthetic(String),

    #[error("nothing to emit")]
    NothingToEmit,

    #[error("{0} already exists (use --force to overwrite)")]
    WouldOverwrite(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code for the error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::MalformedLine { .. } => "malformed-line",
            Error::DuplicateId(_) => "duplicate-id",
            Error::InvalidTokenLength { .. } => "invalid-token-length",
            Error::MissingLength(_) => "missing-length",
            Error::BadHeader(_) => "bad-header",
            Error::BadRow { .. } => "bad-row",
            Error::EmptySelection => "empty-selection",
            Error::EmptyCorpus => "empty-corpus",
            Error::BudgetsNotAscending { .. } => "budgets-not-ascending",
            Error::Positivity { .. } => "positivity",
            Error::TooFewPoints { .. } => "too-few-points",
            Error::DegenerateDesign(_) => "degenerate-design",
            Error::InfeasibleGrid { .. } => "infeasible-grid",
            Error::InvalidConfig(_) => "invalid-config",
            Error::ExcludedPoint { .. } => "excluded-point",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::InsufficientRecords { .. } => "insufficient-records",
            Error::VolumeMismatch { .. } => "volume-mismatch",
            Error::Synthetic(_) => "synthetic",
            Error::NothingToEmit => "nothing-to-emit",
            Error::WouldOverwrite(_) => "would-overwrite",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
