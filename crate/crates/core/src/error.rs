use thiserror::Error;

/// Errors raised by dataset handling, fitting, testing and sweeps.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column {column} has zero variance")]
    ConstantColumn { column: usize },

    #[error("fold count {k} outside 2..={n}")]
    BadFoldCount { k: usize, n: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no rows left after pruning clusters")]
    EmptyResult,

    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("only {rows} usable rows (need at least 3)")]
    TooFewRows { rows: usize },

    #[error("singular design matrix{}", column.map(|c| format!(" (column {c})")).unwrap_or_default())]
    SingularDesign { column: Option<usize> },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("analytic L1 threshold requires epsilon = 0, got {0}")]
    NonzeroEpsilon(f64),

    #[error("fold {fold} failed: {source}")]
    FoldFailure {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("risk estimate has no per-fold risks")]
    NoFolds,

    #[error("no sweep cell for tau={tau}, n={n}, method={method}")]
    MissingCell { tau: f64, n: usize, method: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable variant name, used in structured error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ConstantColumn { .. } => "ConstantColumn",
            Error::BadFoldCount { .. } => "BadFoldCount",
            Error::InvalidInput(_) => "InvalidInput",
            Error::EmptyResult => "EmptyResult",
            Error::Parse { .. } => "Parse",
            Error::MissingColumn(_) => "MissingColumn",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::SingularDesign { .. } => "SingularDesign",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::Domain(_) => "Domain",
            Error::NonzeroEpsilon(_) => "NonzeroEpsilon",
            Error::FoldFailure { .. } => "FoldFailure",
            Error::NoFolds => "NoFolds",
            Error::MissingCell { .. } => "MissingCell",
            Error::Io(_) => "Io",
            Error::Csv(_) => "Csv",
        }
    }
}
