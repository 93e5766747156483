use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid mapping config: {0}")]
    Mapping(String),

    #[error("missing mapped column `{0}`")]
    MissingColumn(String),

    #[error("duplicate respondent id `{0}`")]
    DuplicateRespondent(String),

    #[error("fewer than 2 retained respondents (retained {0})")]
    TooFewRetained(usize),

    #[error("unmappable raw label value `{value}` in column `{column}`")]
    UnmappableLabel { column: String, value: String },

    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("unknown label token `{0}`")]
    UnknownLabel(String),

    #[error("incomplete matrix: {0}")]
    IncompleteMatrix(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("{name} = {value} is out of range ({expected})")]
    OutOfRange {
        name: &'static str,
        value: String,
        expected: String,
    },

    #[error("ordering is not a permutation of the team")]
    NotAPermutation,

    #[error("unknown rater `{0}`")]
    UnknownRater(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("model denominator vanishes at n = {0}")]
    Pole(f64),

    #[error("degenerate points: {0}")]
    DegeneratePoints(String),

    #[error("zero total variance in observed values")]
    ZeroVariance,

    #[error("length mismatch: {0} observed vs {1} predicted")]
    LengthMismatch(usize, usize),

    #[error("unknown stage `{0}` (expected S4, S3, S2, S1 or S0)")]
    UnknownStage(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn out_of_range(
        name: &'static str,
        value: impl ToString,
        expected: impl Into<String>,
    ) -> Self {
        Error::OutOfRange {
            name,
            value: value.to_string(),
            expected: expected.into(),
        }
    }
}
