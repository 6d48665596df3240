//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Too few points, or too little variation, to run a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The data admits no identifiable fit (e.g. all losses identical).
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// A statistic is undefined on this input (e.g. zero total sum of squares).
    #[error("degenerate statistic: {0}")]
    DegenerateStatistic(String),

    /// The regression design matrix is rank-deficient.
    #[error("collinear design: column '{column}' is not identifiable")]
    Collinear { column: String },

    /// A numerical routine failed to produce a usable result.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The input file does not match the expected schema.
    #[error("schema error in {path}: {message}")]
    Schema { path: String, message: String },

    /// A report was asked for an analytic it does not contain.
    #[error("report does not contain the '{0}' analytic")]
    MissingAnalytic(String),

    /// Manifest is invalid or incomplete.
    #[error("manifest error: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
