use std::path::PathBuf;

use thiserror::Error;

use crate::miner::AntecedentId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),

    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed CSV in {path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("label column `{label}` not found in {path} (columns: {available})")]
    MissingLabelColumn {
        label: String,
        path: PathBuf,
        available: String,
    },

    #[error("row {row}, column `{column}`: cannot interpret `{value}` as a binary label")]
    BadLabelValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("row {row}, column `{column}`: `{value}` is not a number")]
    BadNumericValue {
        row: usize,
        column: String,
        value: String,
    },

    #[error("column `{0}` appears more than once")]
    DuplicateColumn(String),

    #[error("table has no rows")]
    EmptyTable,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "no antecedent reaches the support threshold {min_support} ({threshold} of {n} rows); \
         lower --min-support or --min-card"
    )]
    EmptyPool {
        min_support: f64,
        threshold: usize,
        n: usize,
    },

    #[error("antecedent {0} appears twice in the rule list")]
    DuplicateId(AntecedentId),

    #[error("antecedent {0} is not in the pool")]
    UnknownId(AntecedentId),

    #[error("position {pos} is out of range for a list of {len} rules")]
    PositionOutOfRange { pos: usize, len: usize },

    #[error("swap needs two distinct positions with first < second, got ({first}, {second})")]
    InvalidSwap { first: usize, second: usize },

    #[error("rule list of length {len} exceeds the pool size {pool}")]
    ListTooLong { len: usize, pool: usize },

    #[error("rule list asks for more antecedents of cardinality {cardinality} than the pool holds")]
    CardinalityExhausted { cardinality: usize },

    #[error("prefix bound requires alpha = (1, 1), got ({alpha0}, {alpha1})")]
    AlphaUnsupported { alpha0: f64, alpha1: f64 },

    #[error("no legal move from the current rule list")]
    NoLegalMove,

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("feature `{0}` is missing from the observation")]
    MissingFeature(String),

    #[error("input data lacks column `{0}` required by the model")]
    FeatureMismatch(String),

    #[error("AUC needs both classes among the labels")]
    SingleClassLabels,

    #[error("fold {fold} has a single class in its {part} split")]
    DegenerateFold { fold: usize, part: &'static str },
}
