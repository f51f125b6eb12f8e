use std::path::PathBuf;

/// Errors produced by the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse failure at row {row}, column `{column}`: {value:?} is not a {expected}")]
    Parse {
        row: usize,
        column: String,
        value: String,
        expected: &'static str,
    },

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("dataset `{0}` has no rows")]
    EmptyDataset(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("split fractions must be nonnegative and sum to 1, got ({0}, {1}, {2})")]
    FractionSum(f64, f64, f64),

    #[error("invalid skew spec: {0}")]
    InvalidSkew(String),

    #[error("label {label}: clients demand {demanded} samples but only {available} exist")]
    DemandExceedsSupply {
        label: i64,
        demanded: usize,
        available: usize,
    },

    #[error("client {0} holds no samples")]
    EmptyClient(usize),

    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    #[error("KL support violation at index {0}: p > 0 where q = 0")]
    SupportViolation(usize),

    #[error("invalid model spec: {0}")]
    InvalidModel(String),

    #[error("local optimum search did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("infeasible epoch budget: {total} total epochs over {divisor} training slots gives 0 epochs each")]
    InfeasibleBudget { total: usize, divisor: usize },

    #[error("invalid deployment config: {0}")]
    InvalidConfig(String),

    #[error("invalid metric input: {0}")]
    InvalidMetricInput(String),

    #[error("cannot aggregate an empty parameter list")]
    EmptyAggregation,

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
