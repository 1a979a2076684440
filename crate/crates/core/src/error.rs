use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("series too short: need more than {required} observations, got {actual}")]
    TooShort { required: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("archive header is missing required column(s): {0}")]
    MissingHeader(String),

    #[error("city {0} has no valid temperature values (all rows are sentinels)")]
    AllMissing(String),

    #[error("city {0} not found in archive")]
    UnknownCity(String),

    #[error("duplicate (city, date) rows: {0:?}")]
    DuplicateDates(Vec<NaiveDate>),

    #[error("series dates are misaligned at: {0:?}")]
    Misaligned(Vec<NaiveDate>),

    #[error("difference ledger does not match series: {0}")]
    LedgerMismatch(String),

    #[error("scaler has not been fitted")]
    ScalerNotFitted,

    #[error("cannot fit scaler on a constant series")]
    ConstantSeries,

    #[error("series has zero variance")]
    ZeroVariance,

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("learning-rate sweep found no descent in the loss curve")]
    NoDescent,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("every grid-search combination failed")]
    AllFitsFailed,

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps an error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True when the error stems from bad input rather than a bug or I/O failure.
    pub fn is_user_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_user_error(),
            Error::Io(_) | Error::Json(_) | Error::Diverged { .. } | Error::NonFinite(_) => false,
            _ => true,
        }
    }
}
