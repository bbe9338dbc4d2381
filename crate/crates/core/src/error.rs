use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong between reading a CSV and writing a report.
///
/// Variants are split into data problems and configuration problems; the
/// command-line tool maps the former to exit code 1 and the latter to 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("column `{0}` is not declared in the schema")]
    UnknownColumn(String),

    #[error("schema column `{0}` is missing from the data header")]
    MissingColumn(String),

    #[error("row {row}, column `{column}`: cannot parse `{value}` as {expected}")]
    ParseCell {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("row {row}, column `{column}`: category code {code} is not in the schema")]
    UnknownCategory { row: usize, column: String, code: i64 },

    #[error("dataset has {n} rows, at least {min} required")]
    TooFewRows { n: usize, min: usize },

    #[error("BMI must be positive and finite, got {0}")]
    InvalidBmi(f64),

    #[error("row {row}: BMI {bmi} is below the obesity threshold")]
    NotObese { row: usize, bmi: f64 },

    #[error("column `{0}` is not numeric")]
    NotNumeric(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("split ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),

    #[error("split of {n} rows at ratio {ratio} leaves an empty partition")]
    EmptyPartition { n: usize, ratio: f64 },

    #[error("degenerate column `{column}`: {reason}")]
    DegenerateColumn { column: String, reason: String },

    #[error("variable `{0}` has no categories")]
    EmptyCategories(String),

    #[error("object scores collapsed in dimension {dimension}")]
    RankCollapse { dimension: usize },

    #[error("eigenvalue spectrum is empty")]
    EmptySpectrum,

    #[error("spectrum has {len} values, at least {min} required")]
    SpectrumTooShort { len: usize, min: usize },

    #[error("target fraction {target} is unreachable, maximum attainable is {max}")]
    UnreachableTarget { target: f64, max: f64 },

    #[error("malformed table: {0}")]
    InvalidTable(String),

    #[error("models were fitted on different variable sets")]
    SchemaMismatch,

    #[error("model file version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Path {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// True for problems the user fixes by editing the run configuration,
    /// schema or paths rather than the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Schema(_) | Error::Config(_) | Error::Path { .. } | Error::Toml(_) | Error::ModelVersion { .. }
        )
    }

    pub(crate) fn degenerate(column: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::DegenerateColumn {
            column: column.into(),
            reason: reason.into(),
        }
    }
}
