use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("point {point} lies outside the basis domain [{lower}, {upper}]")]
    OutOfDomain { point: f64, lower: f64, upper: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("curve {curve} is degenerate (zero variation)")]
    DegenerateCurve { curve: usize },

    #[error("improper full conditional for {parameter}: shape {shape}, rate {rate}")]
    ImproperConditional {
        parameter: &'static str,
        shape: f64,
        rate: f64,
    },

    #[error("precision matrix is not positive definite (tau2 = {tau2}, diagonal ratio = {condition:e})")]
    NotPositiveDefinite { tau2: f64, condition: f64 },

    #[error("chain {chain} failed at iteration {iteration}: {source}")]
    ChainFailed {
        chain: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("posterior sample is empty")]
    EmptySample,

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("GCV undefined: trace {trace} is not below n = {n}")]
    UndefinedGcv { trace: f64, n: usize },

    #[error("chain {chain} has zero within-chain variance")]
    DegenerateChain { chain: usize },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
